"""Transportation simplex (MODI / u-v method) for small dense problems.

Exact up to floating-point round-off in the flows: every pivot moves mass
around a cycle of the basis tree, so no tolerance enters the plan itself.
Bland's rule on entering and leaving cells rules out cycling on degenerate
pivots.
"""

import numpy as np


def _northwest_corner(a, b):
    n, m = len(a), len(b)
    plan = np.zeros((n, m))
    basis = []
    ra, rb = a.astype(np.float64).copy(), b.astype(np.float64).copy()
    i = j = 0
    while i < n and j < m:
        f = min(ra[i], rb[j])
        plan[i, j] = f
        basis.append((i, j))
        ra[i] -= f
        rb[j] -= f
        if i == n - 1 and j == m - 1:
            break
        # exhaust rows first; on a tie keep a zero-flow basic cell in the next row
        if (ra[i] <= rb[j] and i < n - 1) or j == m - 1:
            i += 1
        else:
            j += 1
    return plan, basis


def _potentials(cost, basis, n, m):
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    u[0] = 0.0
    rows = [[] for _ in range(n)]
    cols = [[] for _ in range(m)]
    for i, j in basis:
        rows[i].append(j)
        cols[j].append(i)
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for j in rows[idx]:
                if np.isnan(v[j]):
                    v[j] = cost[idx, j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in cols[idx]:
                if np.isnan(u[i]):
                    u[i] = cost[i, idx] - v[idx]
                    stack.append(("r", i))
    return u, v


def _cycle(basis, n, m, enter):
    """Cells of the cycle closed by ``enter``, alternating +, -, +, ..."""
    adj = {}
    for i, j in basis:
        adj.setdefault(("r", i), []).append(("c", j))
        adj.setdefault(("c", j), []).append(("r", i))
    start, goal = ("c", enter[1]), ("r", enter[0])
    prev = {start: None}
    queue = [start]
    while queue:
        node = queue.pop(0)
        if node == goal:
            break
        for nxt in adj.get(node, ()):
            if nxt not in prev:
                prev[nxt] = node
                queue.append(nxt)
    path = []
    node = goal
    while node is not None:
        path.append(node)
        node = prev[node]
    # path runs row(enter) -> ... -> col(enter); consecutive nodes are basic cells
    cells = [enter]
    for p, q in zip(path[:-1], path[1:]):
        r, c = (p[1], q[1]) if p[0] == "r" else (q[1], p[1])
        cells.append((r, c))
    return cells


def transport(a, b, cost, max_iter=100_000):
    """Optimal plan for marginals ``a``, ``b`` (equal totals) and cost matrix."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    plan, basis = _northwest_corner(a, b)
    scale = max(1.0, float(np.abs(cost).max()))
    for _ in range(max_iter):
        u, v = _potentials(cost, basis, n, m)
        reduced = cost - u[:, None] - v[None, :]
        in_basis = np.zeros((n, m), dtype=bool)
        for i, j in basis:
            in_basis[i, j] = True
        candidates = np.argwhere((reduced < -1e-12 * scale) & ~in_basis)
        if len(candidates) == 0:
            return plan
        enter = tuple(candidates[0])
        cells = _cycle(basis, n, m, enter)
        minus = cells[1::2]
        theta = min(plan[c] for c in minus)
        leave = min((c for c in minus if plan[c] == theta), key=lambda c: (c[0], c[1]))
        for c in cells[0::2]:
            plan[c] += theta
        for c in minus:
            plan[c] -= theta
        plan[leave] = 0.0
        basis.remove(leave)
        basis.append(enter)
    raise RuntimeError("transportation simplex did not converge")
