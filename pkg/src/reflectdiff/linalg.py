"""Small dense solvers: two-phase simplex with Bland's rule, zero-sum game
values, Lawson-Hanson NNLS, least-distance programming, and cone facets.

Everything here is written for problems with at most a few dozen variables.
"""

import itertools

import numpy as np

# entries below this are treated as zero in ratio tests and pricing; smaller
# pivots lose several digits per pivot
PIVOT_TOL = 1e-9


class LPResult:
    __slots__ = ("status", "x", "value")

    def __init__(self, status, x, value):
        self.status = status  # optimal | infeasible | unbounded
        self.x = x
        self.value = value

    def __repr__(self):
        return f"LPResult(status={self.status!r}, value={self.value!r})"


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _bland(T, basis, ncols, tol=PIVOT_TOL, max_iter=10000):
    """Minimize the objective in the last row of tableau T over the first ``ncols`` columns."""
    for _ in range(max_iter):
        cost = T[-1, :ncols]
        entering = [j for j in range(ncols) if cost[j] < -tol]
        if not entering:
            return "optimal"
        col = entering[0]
        column = T[:-1, col]
        rows = [r for r in range(len(basis)) if column[r] > tol]
        if not rows:
            return "unbounded"
        ratios = [T[r, -1] / column[r] for r in rows]
        best = min(ratios)
        ties = [r for r, q in zip(rows, ratios) if q <= best + tol * (1 + abs(best))]
        row = min(ties, key=lambda r: basis[r])
        _pivot(T, row, col)
        basis[row] = col
    raise RuntimeError("simplex did not terminate")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol=PIVOT_TOL):
    """Minimize ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    mu, me = A_ub.shape[0], A_eq.shape[0]
    m = mu + me
    # columns: x (n) | slacks (mu) | artificials (m) | rhs
    nv = n + mu
    T = np.zeros((m + 1, nv + m + 1))
    T[:mu, :n] = A_ub
    T[:mu, n:nv] = np.eye(mu)
    T[mu:m, :n] = A_eq
    T[:m, -1] = np.concatenate([b_ub, b_eq])
    neg = T[:m, -1] < 0
    T[:m][neg] *= -1.0
    T[:m, nv:nv + m] = np.eye(m)
    basis = list(range(nv, nv + m))
    # phase 1: minimize the sum of artificials
    T[-1, :] = 0.0
    T[-1, nv:nv + m] = 1.0
    for r in range(m):
        T[-1] -= T[r]
    _bland(T, basis, nv + m, tol)
    if -T[-1, -1] > 1e-9 * max(1.0, np.abs(T[:m, -1]).max(initial=0.0)):
        return LPResult("infeasible", None, None)
    # drive zero-level artificials out of the basis
    keep = []
    for r in range(m):
        if basis[r] >= nv:
            j = int(np.argmax(np.abs(T[r, :nv])))
            if abs(T[r, j]) > tol:
                _pivot(T, r, j)
                basis[r] = j
                keep.append(r)
        else:
            keep.append(r)
    T = np.vstack([T[keep], T[-1:]])
    basis = [basis[r] for r in keep]
    T = np.delete(T, np.s_[nv:nv + m], axis=1)
    # phase 2
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status = _bland(T, basis, nv, tol)
    if status == "unbounded":
        return LPResult("unbounded", None, None)
    x = np.zeros(nv)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    x = x[:n]
    return LPResult("optimal", x, float(c @ x))


def game_value(M):
    """Value and optimal mixed strategy of ``min_{eta in simplex} max_j (eta @ M)_j``.

    Rows are the minimizer's pure strategies. 1x1 games are returned in
    closed form; everything else goes through the simplex.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    k, J = M.shape
    if k == 1:
        return float(M[0].max()), np.ones(1)
    # variables: eta (k), v+ , v-
    c = np.zeros(k + 2)
    c[k], c[k + 1] = 1.0, -1.0
    A_ub = np.hstack([M.T, -np.ones((J, 1)), np.ones((J, 1))])
    A_eq = np.zeros((1, k + 2))
    A_eq[0, :k] = 1.0
    res = linprog(c, A_ub, np.zeros(J), A_eq, [1.0])
    if res.status != "optimal":
        raise RuntimeError(f"game LP failed: {res.status}")
    eta = np.clip(res.x[:k], 0.0, None)
    eta /= eta.sum()
    return float((eta @ M).max()), eta


def maximin_value(M):
    """``max_{eta in simplex} min_j (eta @ M)_j`` and its maximizer."""
    v, eta = game_value(-np.asarray(M, dtype=float))
    return -v, eta


def nnls(A, b, max_iter=None, tol=None):
    """Lawson-Hanson active-set solution of ``min |A x - b|`` subject to ``x >= 0``.

    Returns ``(x, residual_norm)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, n = A.shape
    eps = np.finfo(float).eps
    if tol is None:
        # w = A^T (b - A x) scales like |A| |b|
        tol = 10 * max(m, n) * eps * np.abs(A).max(initial=0.0) * np.abs(b).max(initial=0.0)
    max_iter = max_iter or 30 * max(n, 1)
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ (b - A @ x)
    it = 0
    while True:
        free = ~passive
        if not np.any(free) or w[free].max() <= tol:
            break
        j = np.flatnonzero(free)[np.argmax(w[free])]
        passive[j] = True
        while True:
            it += 1
            if it > max_iter:
                return x, float(np.linalg.norm(A @ x - b))
            idx = np.flatnonzero(passive)
            z = np.zeros(n)
            z[idx] = np.linalg.lstsq(A[:, idx], b, rcond=None)[0]
            if np.all(z[idx] > 0):
                x = z
                break
            neg = idx[z[idx] <= 0]
            alpha = np.min(x[neg] / (x[neg] - z[neg]))
            x = x + alpha * (z - x)
            passive &= x > 10 * eps * np.abs(x).max(initial=0.0)
            x[~passive] = 0.0
        w = A.T @ (b - A @ x)
    return x, float(np.linalg.norm(A @ x - b))


def ldp(G, h):
    """Least-distance program ``min |x|`` subject to ``G x >= h``.

    Lawson-Hanson reduction to NNLS. Returns ``None`` when the constraints are
    incompatible.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    m, n = G.shape
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f)
    r = E @ u - f
    if np.linalg.norm(r) <= 1e-12 or abs(r[-1]) <= 1e-14:
        return None
    return -r[:n] / r[-1]


def cone_halfspaces(N, tol=1e-10):
    """Rows ``H`` with ``cone(columns of N) = {e : H e >= 0}``.

    Equality constraints (directions orthogonal to the span) appear as a pair
    of opposite rows. Facets are found by enumerating (r-1)-subsets of
    generators, which is cheap for the <= 16 generators handled here.
    """
    N = np.atleast_2d(np.asarray(N, dtype=float))
    d, k = N.shape
    U, s, _ = np.linalg.svd(N)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    rows = []
    for v in U[:, r:].T:
        rows.extend([v, -v])
    if r == 0:
        return np.array(rows).reshape(-1, d)
    B = U[:, :r]
    P = B.T @ N  # generators in span coordinates
    if r == 1:
        signs = np.sign(np.where(np.abs(P[0]) > tol, P[0], 0.0))
        if np.all(signs >= 0):
            rows.append(B[:, 0])
        elif np.all(signs <= 0):
            rows.append(-B[:, 0])
        return np.array(rows).reshape(-1, d)
    facets = []
    for S in itertools.combinations(range(k), r - 1):
        sub = P[:, list(S)]
        if np.linalg.matrix_rank(sub, tol) != r - 1:
            continue
        w = np.linalg.svd(sub.T)[2][-1]
        proj = w @ P
        for sgn in (1.0, -1.0):
            if np.all(sgn * proj >= -tol):
                cand = sgn * w
                if not any(np.allclose(cand, f, atol=1e-9) for f in facets):
                    facets.append(cand)
    rows.extend(B @ f for f in facets)
    return np.array(rows).reshape(-1, d)


def min_norm_nonneg_solution(G, u):
    """Minimal-norm ``eta >= 0`` with ``G eta = u`` (``None`` if no such eta exists)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    u = np.asarray(u, dtype=float).ravel()
    k = G.shape[1]
    C = np.vstack([np.eye(k), G, -G])
    h = np.concatenate([np.zeros(k), u, -u])
    return ldp(C, h)
