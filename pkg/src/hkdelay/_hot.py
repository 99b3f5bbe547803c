"""Hot inner loops.

Each kernel has a loop form (compiled by numba when the numba backend is on)
and, where the loop vectorizes, a numpy form. The public names at the bottom
pick one according to ``_accel.USE_NUMBA``; both forms stay importable so
tests and the benchmark can compare them.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# influence kernels on squared separation


@njit
def _kernel_value(code, params, r2):
    if code == 0:
        return params[0]
    if code == 1:
        return params[0] / (1.0 + r2) ** params[1]
    return params[0] * math.exp(-r2 / (params[1] * params[1])) + params[2]


def _kernel_numpy(code, params, r2):
    if code == 0:
        return np.full_like(r2, params[0])
    if code == 1:
        return params[0] / (1.0 + r2) ** params[1]
    return params[0] * np.exp(-r2 / (params[1] * params[1])) + params[2]


# ---------------------------------------------------------------------------
# sum_j w_j k(q_i, p_j) (p_j - q_i)


@njit
def attract_loops(queries, targets, weights, code, params):
    nq, dim = queries.shape
    nt = targets.shape[0]
    out = np.zeros((nq, dim))
    diff = np.empty(dim)
    for i in range(nq):
        for j in range(nt):
            r2 = 0.0
            for c in range(dim):
                diff[c] = targets[j, c] - queries[i, c]
                r2 += diff[c] * diff[c]
            coef = weights[j] * _kernel_value(code, params, r2)
            for c in range(dim):
                out[i, c] += coef * diff[c]
    return out


def attract_numpy(queries, targets, weights, code, params):
    diff = targets[None, :, :] - queries[:, None, :]
    r2 = np.einsum("ijc,ijc->ij", diff, diff)
    coef = weights[None, :] * _kernel_numpy(code, params, r2)
    return np.einsum("ij,ijc->ic", coef, diff)


# ---------------------------------------------------------------------------
# farthest pair of a point cloud; ties go to the first pair in (i, j) order


@njit
def farthest_pair_loops(points):
    n, dim = points.shape
    best = -1.0
    bi = 0
    bj = 0
    for i in range(n):
        for j in range(i + 1, n):
            r2 = 0.0
            for c in range(dim):
                t = points[i, c] - points[j, c]
                r2 += t * t
            if r2 > best:
                best = r2
                bi = i
                bj = j
    if n < 2:
        return 0.0, 0, 0
    return math.sqrt(best), bi, bj


def farthest_pair_numpy(points, block=256):
    n = points.shape[0]
    if n < 2:
        return 0.0, 0, 0
    best, bi, bj = -1.0, 0, 0
    for start in range(0, n - 1, block):
        rows = points[start : start + block]
        diff = rows[:, None, :] - points[None, :, :]
        r2 = np.einsum("ijc,ijc->ij", diff, diff)
        # keep only j > i
        idx_i = np.arange(start, start + rows.shape[0])[:, None]
        r2 = np.where(np.arange(n)[None, :] > idx_i, r2, -1.0)
        k = int(np.argmax(r2))
        i, j = divmod(k, n)
        if r2[i, j] > best:
            best, bi, bj = float(r2[i, j]), start + i, j
    return math.sqrt(best), bi, bj


# ---------------------------------------------------------------------------
# square assignment, shortest augmenting path with potentials (O(n^3))


@njit
def hungarian_loops(cost):
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    perm = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        perm[p[j] - 1] = j - 1
    return perm


def hungarian_numpy(cost):
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = cost[i0 - 1, :] - u[i0] - v[1:]
            better = free[1:] & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            np.add.at(u, p[used], delta)
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    perm = np.empty(n, dtype=np.int64)
    perm[p[1:] - 1] = np.arange(n)
    return perm


# ---------------------------------------------------------------------------
# maximum bipartite matching (Hopcroft-Karp) on a dense adjacency matrix


@njit
def hopcroft_karp_loops(adj):
    n_u, n_v = adj.shape
    big = n_u + n_v + 2
    match_u = np.full(n_u, -1, dtype=np.int64)
    match_v = np.full(n_v, -1, dtype=np.int64)
    dist = np.empty(n_u, dtype=np.int64)
    queue = np.empty(n_u, dtype=np.int64)
    nxt = np.empty(n_u, dtype=np.int64)
    stack_u = np.empty(n_u, dtype=np.int64)
    stack_v = np.empty(n_u, dtype=np.int64)
    size = 0
    while True:
        # layered BFS from free left vertices
        head = 0
        tail = 0
        for u in range(n_u):
            if match_u[u] == -1:
                dist[u] = 0
                queue[tail] = u
                tail += 1
            else:
                dist[u] = big
        limit = big
        while head < tail:
            u = queue[head]
            head += 1
            if dist[u] >= limit:
                continue
            for v in range(n_v):
                if adj[u, v]:
                    w = match_v[v]
                    if w == -1:
                        if limit == big:
                            limit = dist[u] + 1
                    elif dist[w] == big:
                        dist[w] = dist[u] + 1
                        queue[tail] = w
                        tail += 1
        if limit == big:
            break
        # vertex-disjoint shortest augmenting paths by iterative DFS
        for u in range(n_u):
            nxt[u] = 0
        for root in range(n_u):
            if match_u[root] != -1:
                continue
            depth = 0
            stack_u[0] = root
            while depth >= 0:
                u = stack_u[depth]
                advanced = False
                while nxt[u] < n_v:
                    v = nxt[u]
                    nxt[u] += 1
                    if not adj[u, v]:
                        continue
                    w = match_v[v]
                    if w == -1:
                        if dist[u] + 1 == limit:
                            stack_v[depth] = v
                            for k in range(depth + 1):
                                match_u[stack_u[k]] = stack_v[k]
                                match_v[stack_v[k]] = stack_u[k]
                            size += 1
                            depth = -1
                            advanced = True
                            break
                    elif dist[w] == dist[u] + 1:
                        stack_v[depth] = v
                        depth += 1
                        stack_u[depth] = w
                        advanced = True
                        break
                if not advanced:
                    dist[u] = big
                    depth -= 1
    return size, match_u


# Hopcroft-Karp does not vectorize; the numpy backend runs the loop form as
# plain Python over lists, which is far faster than element-wise numpy access.
def hopcroft_karp_python(adj):
    adj = np.asarray(adj, dtype=bool)
    n_u, n_v = adj.shape
    neighbours = [np.flatnonzero(row).tolist() for row in adj]
    big = n_u + n_v + 2
    match_u = [-1] * n_u
    match_v = [-1] * n_v
    size = 0
    while True:
        dist = [0 if match_u[u] == -1 else big for u in range(n_u)]
        queue = [u for u in range(n_u) if match_u[u] == -1]
        limit = big
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            if dist[u] >= limit:
                continue
            for v in neighbours[u]:
                w = match_v[v]
                if w == -1:
                    if limit == big:
                        limit = dist[u] + 1
                elif dist[w] == big:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if limit == big:
            break
        nxt = [0] * n_u
        for root in range(n_u):
            if match_u[root] != -1:
                continue
            stack_u = [root]
            stack_v = []
            while stack_u:
                u = stack_u[-1]
                nb = neighbours[u]
                advanced = False
                while nxt[u] < len(nb):
                    v = nb[nxt[u]]
                    nxt[u] += 1
                    w = match_v[v]
                    if w == -1:
                        if dist[u] + 1 == limit:
                            stack_v.append(v)
                            for uu, vv in zip(stack_u, stack_v):
                                match_u[uu] = vv
                                match_v[vv] = uu
                            size += 1
                            stack_u = []
                            advanced = True
                            break
                    elif dist[w] == dist[u] + 1:
                        stack_v.append(v)
                        stack_u.append(w)
                        advanced = True
                        break
                if not advanced:
                    dist[u] = big
                    stack_u.pop()
                    if stack_v:
                        stack_v.pop()
    return size, np.asarray(match_u, dtype=np.int64)


if USE_NUMBA:
    attract = attract_loops
    farthest_pair = farthest_pair_loops
    hungarian = hungarian_loops
    hopcroft_karp = hopcroft_karp_loops
else:
    attract = attract_numpy
    farthest_pair = farthest_pair_numpy
    hungarian = hungarian_numpy
    hopcroft_karp = hopcroft_karp_python
