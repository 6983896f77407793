"""Monte Carlo estimates of the discounted value v_h(x) = E int e^{-t} h(X(t)) dt.

Two estimators: the controlled clock integrates e^{-lambda0} h(Y) d lambda0
along the slow-clock path, the constrained clock integrates e^{-t} h(X) dt
along its time change. Both paths are piecewise constant, so the integrals
are computed exactly with weights e^{-a} - e^{-b} per constant piece. Also
here: a grid-based check of the viscosity subsolution inequality.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from ._validation import as_point, as_points, check_count
from .controlled import default_workers, map_paths, simulate_controlled
from .errors import InputError
from .geometry import classify, local_boundary_data
from .scenario import load_scenario
from .timechange import time_change

ESTIMATORS = ("controlled", "constrained")


class TestFunction:
    """A smooth function with gradient and Hessian.

    Kinds: ``constant`` (c), ``exponential`` (scale * exp(<a, x>)),
    ``polynomial`` (sum of coef * x^exps terms), ``bump``
    (height * exp(-|x - center|^2 / (2 width^2))), and ``sum`` (linear
    combinations of the others).
    """

    __test__ = False  # not a pytest class

    def __init__(self, kind, dim, **params):
        self.kind = kind
        self.dim = int(dim)
        self.params = params
        if kind == "constant":
            self.c = float(params["c"])
        elif kind == "exponential":
            self.a = np.broadcast_to(np.asarray(params["a"], dtype=float), (self.dim,)).copy()
            self.scale = float(params.get("scale", 1.0))
        elif kind == "polynomial":
            terms = params["terms"]
            self.coefs = np.array([float(c) for c, _ in terms])
            self.exps = np.array([list(e) for _, e in terms], dtype=int).reshape(-1, self.dim)
        elif kind == "bump":
            self.center = np.broadcast_to(np.asarray(params["center"], dtype=float), (self.dim,)).copy()
            self.width = float(params["width"])
            self.height = float(params.get("height", 1.0))
            if not self.width > 0:
                raise InputError("bump width must be positive")
        elif kind == "sum":
            self.parts = [(float(c), f) for c, f in params["parts"]]
            if any(f.dim != self.dim for _, f in self.parts):
                raise InputError("summands must share the dimension")
        else:
            raise InputError(f"unknown test function kind {kind!r}")

    # constructors

    @classmethod
    def constant(cls, c, dim):
        return cls("constant", dim, c=c)

    @classmethod
    def exponential(cls, a, scale=1.0, dim=None):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return cls("exponential", dim or a.size, a=a.tolist(), scale=scale)

    @classmethod
    def polynomial(cls, terms, dim):
        return cls("polynomial", dim, terms=[(float(c), tuple(int(k) for k in e)) for c, e in terms])

    @classmethod
    def bump(cls, center, width, height=1.0):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls("bump", center.size, center=center.tolist(), width=width, height=height)

    @classmethod
    def combination(cls, parts):
        parts = list(parts)
        return cls("sum", parts[0][1].dim, parts=parts)

    def __mul__(self, c):
        return TestFunction.combination([(float(c), self)])

    __rmul__ = __mul__

    def __add__(self, other):
        return TestFunction.combination([(1.0, self), (1.0, other)])

    def __neg__(self):
        return self * -1.0

    # evaluation

    def value(self, X):
        X = as_points(X, self.dim)
        if self.kind == "constant":
            return np.full(X.shape[0], self.c)
        if self.kind == "exponential":
            return self.scale * np.exp(X @ self.a)
        if self.kind == "polynomial":
            return np.prod(X[:, None, :] ** self.exps[None], axis=2) @ self.coefs
        if self.kind == "bump":
            r2 = np.sum((X - self.center) ** 2, axis=1)
            return self.height * np.exp(-r2 / (2 * self.width ** 2))
        return sum(c * f.value(X) for c, f in self.parts)

    __call__ = value

    def grad(self, X):
        X = as_points(X, self.dim)
        n, d = X.shape
        if self.kind == "constant":
            return np.zeros((n, d))
        if self.kind == "exponential":
            return self.value(X)[:, None] * self.a
        if self.kind == "polynomial":
            out = np.zeros((n, d))
            for c, e in zip(self.coefs, self.exps):
                for k in range(d):
                    if e[k] == 0:
                        continue
                    ek = e.copy()
                    ek[k] -= 1
                    out[:, k] += c * e[k] * np.prod(X ** ek, axis=1)
            return out
        if self.kind == "bump":
            return -self.value(X)[:, None] * (X - self.center) / self.width ** 2
        return sum(c * f.grad(X) for c, f in self.parts)

    def hess(self, X):
        X = as_points(X, self.dim)
        n, d = X.shape
        if self.kind == "constant":
            return np.zeros((n, d, d))
        if self.kind == "exponential":
            return self.value(X)[:, None, None] * np.outer(self.a, self.a)
        if self.kind == "polynomial":
            out = np.zeros((n, d, d))
            for c, e in zip(self.coefs, self.exps):
                for k in range(d):
                    for l in range(d):
                        ek = e.copy()
                        fac = ek[k]
                        ek[k] -= 1
                        fac *= ek[l]
                        ek[l] -= 1
                        if fac == 0:
                            continue
                        out[:, k, l] += c * fac * np.prod(X ** ek, axis=1)
            return out
        if self.kind == "bump":
            v = self.value(X)
            z = (X - self.center) / self.width ** 2
            return v[:, None, None] * (z[:, :, None] * z[:, None, :]
                                       - np.eye(d) / self.width ** 2)
        return sum(c * f.hess(X) for c, f in self.parts)

    def sup_abs(self, domain, n=4096, seed=0):
        """max |h| over the closed domain: exact for constants, otherwise the
        maximum over a Sobol sample of the bounding box (plus its corners)."""
        if self.kind == "constant":
            return abs(self.c)
        lo, hi = (np.asarray(b, dtype=float) for b in domain.bbox)
        pts = qmc.scale(qmc.Sobol(domain.dim, seed=seed).random(n), lo, hi)
        corners = np.array(np.meshgrid(*zip(lo, hi))).reshape(domain.dim, -1).T
        pts = np.vstack([pts, corners])
        pts = pts[domain.contains(pts)]
        return float(np.abs(self.value(pts)).max()) if pts.size else 0.0

    def to_dict(self):
        if self.kind == "sum":
            return {"kind": "sum", "dimension": self.dim,
                    "parts": [[c, f.to_dict()] for c, f in self.parts]}
        out = {"kind": self.kind, "dimension": self.dim}
        for k, v in self.params.items():
            out[k] = [[c, list(e)] for c, e in v] if k == "terms" else v
        return out

    @classmethod
    def from_dict(cls, d, dim=None):
        d = dict(d)
        kind = d.pop("kind", None)
        dim = int(d.pop("dimension", dim or 0))
        if kind == "sum":
            parts = [(c, cls.from_dict(f, dim)) for c, f in d["parts"]]
            return cls("sum", dim, parts=parts)
        if not dim:
            raise InputError("test function needs a dimension")
        try:
            return cls(kind, dim, **d)
        except KeyError as exc:
            raise InputError(f"test function missing field {exc}") from None

    def __repr__(self):
        return f"TestFunction({json.dumps(self.to_dict())})"


def parse_test_function(text, dim):
    """``const:C``, ``exp:a1,...,ad``, ``bump:c1,...,cd:width`` or a JSON object."""
    text = text.strip()
    try:
        if text.startswith("{"):
            return TestFunction.from_dict(json.loads(text), dim)
        kind, _, rest = text.partition(":")
        if kind == "const":
            return TestFunction.constant(float(rest), dim)
        if kind == "exp":
            a = [float(v) for v in rest.split(",")]
            return TestFunction.exponential(a if len(a) == dim else a * dim)
        if kind == "bump":
            c, _, w = rest.partition(":")
            return TestFunction.bump([float(v) for v in c.split(",")], float(w))
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse test function {text!r}: {exc}") from None
    raise InputError(f"cannot parse test function {text!r}; use const:, exp:, bump: or JSON")


def check_derivatives(f, X, step=1e-5):
    """Largest relative mismatch between analytic and central-difference
    gradients and Hessians at the rows of X."""
    X = as_points(X, f.dim)
    worst = 0.0
    g, H = f.grad(X), f.hess(X)
    for k in range(f.dim):
        e = np.zeros(f.dim)
        e[k] = step
        fd = (f.value(X + e) - f.value(X - e)) / (2 * step)
        worst = max(worst, float(np.max(np.abs(fd - g[:, k]) / (1 + np.abs(g[:, k])))))
        fdh = (f.grad(X + e) - f.grad(X - e)) / (2 * step)
        worst = max(worst, float(np.max(np.abs(fdh - H[:, :, k]) / (1 + np.abs(H[:, :, k])))))
    return worst


def controlled_discounted(path, h, horizon):
    """int_0^horizon e^{-lambda0} h(Y) d lambda0 along one controlled path."""
    l0 = np.minimum(path.lambda0, horizon)
    w = np.exp(-l0[:-1]) - np.exp(-l0[1:])
    live = w != 0
    if not np.any(live):
        return 0.0
    return float(np.dot(w[live], h.value(path.y[:-1][live])))


def constrained_discounted(cp, h, horizon):
    """int_0^horizon e^{-t} h(X(t)) dt along one time-changed path."""
    return cp.discounted_integral(h.value(cp.x), horizon)


@dataclass
class ResolventEstimate:
    mean: float
    stderr: float
    n_paths: int
    estimator: str
    scenario_hash: str
    seed: int
    x0: tuple
    horizon: float
    truncation_bound: float
    workers: int = 1
    values: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "n_paths": self.n_paths,
                "estimator": self.estimator, "scenario_hash": self.scenario_hash,
                "seed": self.seed, "x0": list(self.x0), "horizon": self.horizon,
                "truncation_bound": self.truncation_bound, "workers": self.workers}


def _estimate(estimator, scenario, h, x0, n_paths, seed, horizon, workers, keep_values):
    sc = load_scenario(scenario)
    check_count(n_paths, "paths", minimum=2)
    if h.dim != sc.domain.dim:
        raise InputError(f"test function is {h.dim}-dimensional, domain is {sc.domain.dim}")
    x0 = tuple(as_point(sc.x0 if x0 is None else x0, sc.domain.dim, "x0"))
    seed = sc.seed("resolvent") if seed is None else int(seed)
    T = sc.numerics.t_trunc if horizon is None else float(horizon)

    def one(p):
        path = simulate_controlled(sc.domain, sc.coefficients, sc.behavior, x0, sc.dt,
                                   delta=sc.delta, lambda0_target=T, seed=seed, path=p,
                                   select_mode=sc.numerics.select_mode)
        if estimator == "controlled":
            return controlled_discounted(path, h, T)
        return constrained_discounted(time_change(path), h, T)

    workers = default_workers() if workers is None else int(workers)
    vals = np.array(map_paths(one, n_paths, workers))
    # numpy sums 1-d arrays pairwise; the order is the path order
    mean = float(np.sum(vals) / vals.size)
    se = float(np.std(vals, ddof=1) / math.sqrt(vals.size))
    bound = math.exp(-T) * h.sup_abs(sc.domain)
    return ResolventEstimate(mean, se, int(n_paths), estimator, sc.hash, seed, x0, T, bound,
                             workers, vals if keep_values else None)


def estimate_vh_controlled(scenario, h, x0=None, n_paths=1000, seed=None, horizon=None,
                           workers=None, keep_values=False):
    """v_h(x0) by the controlled clock: mean over paths of
    sum_k h(y_k) (e^{-lambda0_k} - e^{-lambda0_{k+1}}) up to lambda0 = horizon."""
    return _estimate("controlled", scenario, h, x0, n_paths, seed, horizon, workers, keep_values)


def estimate_vh_constrained(scenario, h, x0=None, n_paths=1000, seed=None, horizon=None,
                            workers=None, keep_values=False):
    """v_h(x0) by the physical clock of the time-changed path."""
    return _estimate("constrained", scenario, h, x0, n_paths, seed, horizon, workers, keep_values)


def combined_stderr(*estimates):
    return math.sqrt(sum(e.stderr ** 2 for e in estimates))


def agree(a, b, k=3.0, slack=1e-12):
    """|a - b| <= k * combined stderr + slack; the default slack only absorbs
    rounding, which matters when both estimates have zero variance."""
    return abs(a.mean - b.mean) <= k * combined_stderr(a, b) + slack


# viscosity check ---------------------------------------------------------


@dataclass
class VGrid:
    points: np.ndarray
    values: np.ndarray
    stderr: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"points": self.points.tolist(), "values": self.values.tolist(),
                "stderr": None if self.stderr is None else self.stderr.tolist(),
                "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        try:
            pts = np.atleast_2d(np.asarray(d["points"], dtype=float))
            vals = np.asarray(d["values"], dtype=float).ravel()
        except KeyError as exc:
            raise InputError(f"v-grid missing field {exc}") from None
        if pts.shape[0] != vals.size:
            raise InputError("v-grid needs one value per point")
        se = d.get("stderr")
        return cls(pts, vals, None if se is None else np.asarray(se, dtype=float),
                   d.get("meta", {}))


def make_grid(domain, spacing=None):
    """Uniform grid over the bounding box intersected with the closed domain,
    in lexicographic order. Default spacing is 5% of the diameter."""
    spacing = 0.05 * domain.diameter if spacing is None else float(spacing)
    lo, hi = (np.asarray(b, dtype=float) for b in domain.bbox)
    axes = [np.linspace(a, b, int(round((b - a) / spacing)) + 1) for a, b in zip(lo, hi)]
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(domain.dim, -1).T
    return pts[domain.contains(pts)]


def estimate_v_grid(scenario, h, spacing=None, n_paths=200, seed=None, horizon=None,
                    estimator="controlled", workers=None):
    """v_h at every grid point, with the same noise streams at every point."""
    sc = load_scenario(scenario)
    if estimator not in ESTIMATORS:
        raise InputError(f"estimator must be one of {ESTIMATORS}")
    fn = estimate_vh_controlled if estimator == "controlled" else estimate_vh_constrained
    pts = make_grid(sc.domain, spacing)
    ests = [fn(sc, h, x, n_paths, seed, horizon, workers) for x in pts]
    return VGrid(pts, np.array([e.mean for e in ests]), np.array([e.stderr for e in ests]),
                 {"scenario_hash": sc.hash, "h": h.to_dict(), "estimator": estimator,
                  "n_paths": n_paths, "seed": ests[0].seed if ests else seed})


@dataclass
class ViscosityReport:
    x_star: tuple
    index: int
    location: str          # interior | boundary
    v_minus_f: float
    residual: float        # v - A f - h at x_star
    cone_max: float        # max over cone generators of <grad f, g>; None inside
    passes: bool
    slack: float
    tolerance: float

    def to_dict(self):
        return dict(self.__dict__)


def viscosity_subsolution_check(v_grid, f, scenario, h, tolerance=None):
    """At the grid maximizer x* of v - f: inside, v - A f <= h + tol; on the
    boundary, the same inequality or max_g <grad f(x*), g> >= -tol over the
    reflection directions of the active faces.

    ``slack`` is how far the deciding inequality is from failing (>= -tol
    means it holds).
    """
    sc = load_scenario(scenario)
    grid = v_grid if isinstance(v_grid, VGrid) else VGrid.from_dict(v_grid)
    tol = sc.numerics.tolerances["viscosity"] if tolerance is None else float(tolerance)
    pts = as_points(grid.points, sc.domain.dim)
    order = np.lexsort(pts.T[::-1])
    diff = grid.values[order] - f.value(pts[order])
    i = int(order[int(np.argmax(diff))])
    x = pts[i:i + 1]
    Af = float(sc.coefficients.generator(x, f.grad(x), f.hess(x))[0])
    residual = float(grid.values[i] - Af - h.value(x)[0])
    kind = classify(sc.domain, x[0]).kind
    if kind == "interior":
        return ViscosityReport(tuple(map(float, x[0])), i, "interior", float(diff.max()),
                               residual, None, residual <= tol, -residual, tol)
    local = local_boundary_data(sc.domain, x[0], with_script_i=False)
    cone_max = float(np.max(local.reflections @ f.grad(x)[0]))
    passes = residual <= tol or cone_max >= -tol
    slack = max(-residual, cone_max)
    return ViscosityReport(tuple(map(float, x[0])), i, "boundary", float(diff.max()), residual,
                           cone_max, passes, slack, tol)


def viscosity_supersolution_check(v_grid, f, scenario, h, tolerance=None):
    """Supersolution check through the sign flip v_{-h} = -v_h."""
    grid = v_grid if isinstance(v_grid, VGrid) else VGrid.from_dict(v_grid)
    flipped = VGrid(grid.points, -grid.values, grid.stderr, grid.meta)
    return viscosity_subsolution_check(flipped, -f, scenario, -h, tolerance)
