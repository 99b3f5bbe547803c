"""Command-line entry point: ``hkdelay run | stability | limit``.

Exit status is 0 on success, 2 when a certificate or study check fails and
1 on any error (bad config, divergence, I/O).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import HKDelayError
from .experiments import limit_study, load_scenario, run, stability_study

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hkdelay", description="Delayed leader-follower opinion dynamics laboratory.")
    ap.add_argument("--version", action="version", version=f"hkdelay {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write CSV + JSON")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--out", required=True, type=Path)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--step", type=float)
    p_run.add_argument("--t-end", dest="t_end", type=float)

    p_st = sub.add_parser("stability", help="epsilon sweep around a scenario")
    p_st.add_argument("--config", required=True, type=Path)
    p_st.add_argument("--epsilon", type=float, default=1e-3)
    p_st.add_argument("--p", default="2", choices=["1", "2", "inf"])
    p_st.add_argument("--kind", default="random", choices=["random", "translation"])
    p_st.add_argument("--out", type=Path)

    p_lim = sub.add_parser("limit", help="refinement study N0, 2 N0, ...")
    p_lim.add_argument("--config", required=True, type=Path)
    p_lim.add_argument("--n0", type=int, required=True)
    p_lim.add_argument("--levels", type=int, default=4)
    p_lim.add_argument("--out", type=Path)
    return ap


def _emit(doc: dict, text: str, out: Path | None, stem: str) -> None:
    if out is None:
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.csv").write_text(text, encoding="utf-8", newline="\n")
    with open(out / f"{stem}.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        sc = load_scenario(args.config)
        if args.command == "run":
            sc = sc.with_overrides(seed=args.seed, step=args.step, t_end=args.t_end)
            report = run(sc, args.out)
            for v in report.certificate.violations:
                print(f"violation: t={v.t:.6g} d={v.d:.6g} bound={v.bound:.6g}", file=sys.stderr)
            return report.exit_code
        if args.command == "stability":
            rep = stability_study(sc, p=args.p, epsilon=args.epsilon, kind=args.kind)
            _emit(rep.to_json(), rep.csv_text(), args.out, "stability")
            return EXIT_OK if rep.passed else EXIT_FAILED
        rep = limit_study(replace(sc, n=args.n0), n0=args.n0, levels=args.levels)
        _emit(rep.to_json(), rep.csv_text(), args.out, "limit")
        return EXIT_OK if rep.passed else EXIT_FAILED
    except (HKDelayError, OSError) as exc:
        print(f"hkdelay: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
