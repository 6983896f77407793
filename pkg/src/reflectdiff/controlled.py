"""Slow-clock simulation of (Y, lambda0, Lambda1).

Inside the closed domain Y takes Euler-Maruyama steps and only lambda0 runs.
Whenever Y violates a face it is pushed back by micro-steps of length delta
along a reflection direction chosen by ``select_reflection_face`` (or, for
nonlocal behavior, it waits an Exp(1) amount of lambda1 time and jumps to a
kernel target). Every event is recorded so the clocks can be inverted later.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernel as K
from ._geomkern import select_face
from ._validation import as_point, as_points, check_count, check_positive
from .errors import (DegenerateDirection, EscapedWorkingRegion, InputError, NonFiniteState,
                     NoViolatedFace, OutOfRange)
from .geometry import classify

SELECT_MODES = {"first": 0, "steepest": 1}
WORKERS_ENV = "REFLECTDIFF_WORKERS"
CHUNK_FRACTION = 0.5
PHI_SCALE = 10.0


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise InputError(f"{WORKERS_ENV} must be a positive integer") from None


class DiffusionCoefficients:
    """Affine coefficients b(x) = b0 + B x and sigma(x) = S0 + sum_l x_l S1[l].

    ``kind`` records how the object was built (constant, affine or a builtin
    name); the simulator only ever sees the affine arrays.
    """

    BUILTINS = ("brownian", "zero", "ornstein_uhlenbeck", "drifted_brownian")

    def __init__(self, b0, B, S0, S1=None, kind="affine", name=None, params=None):
        self.b0 = np.atleast_1d(np.asarray(b0, dtype=float))
        d = self.b0.size
        self.B = np.asarray(B, dtype=float).reshape(d, d)
        self.S0 = np.atleast_2d(np.asarray(S0, dtype=float))
        if self.S0.shape[0] != d:
            raise InputError(f"sigma must have {d} rows, got shape {self.S0.shape}")
        q = self.S0.shape[1]
        self.S1 = np.zeros((d, d, q)) if S1 is None else np.asarray(S1, dtype=float).reshape(d, d, q)
        self.kind = kind
        self.name = name
        self.params = params or {}
        for arr in (self.b0, self.B, self.S0, self.S1):
            if not np.all(np.isfinite(arr)):
                raise InputError("diffusion coefficients must be finite")

    @property
    def dim(self):
        return self.b0.size

    @property
    def noise_dim(self):
        return self.S0.shape[1]

    @classmethod
    def constant(cls, b, sigma):
        b = np.atleast_1d(np.asarray(b, dtype=float))
        d = b.size
        return cls(b, np.zeros((d, d)), np.asarray(sigma, dtype=float).reshape(d, -1), kind="constant")

    @classmethod
    def affine(cls, b0, B, S0, S1=None):
        return cls(b0, B, S0, S1, kind="affine")

    @classmethod
    def builtin(cls, name, dim, **params):
        eye = np.eye(dim)
        zero = np.zeros((dim, dim))
        if name == "brownian":
            scale = float(params.get("scale", 1.0))
            out = cls(np.zeros(dim), zero, scale * eye)
        elif name == "zero":
            out = cls(np.zeros(dim), zero, zero)
        elif name == "ornstein_uhlenbeck":
            rate = float(params.get("rate", 1.0))
            mean = np.broadcast_to(np.asarray(params.get("mean", 0.0), dtype=float), (dim,))
            out = cls(rate * mean, -rate * eye, eye)
        elif name == "drifted_brownian":
            drift = np.broadcast_to(np.asarray(params.get("drift", 0.0), dtype=float), (dim,))
            out = cls(drift, zero, eye)
        else:
            raise InputError(f"unknown builtin coefficients {name!r}; choose from {cls.BUILTINS}")
        out.kind, out.name, out.params = "builtin", name, dict(params)
        return out

    def drift(self, X):
        X = np.atleast_2d(X)
        return self.b0 + X @ self.B.T

    def sigma(self, X):
        X = np.atleast_2d(X)
        return self.S0 + np.einsum("nl,lkr->nkr", X, self.S1)

    def generator(self, X, grad, hess):
        """A f = <b, grad f> + 1/2 tr(sigma sigma^T hess f) at each row of X."""
        b = self.drift(X)
        S = self.sigma(X)
        a = np.einsum("nkr,nlr->nkl", S, S)
        return np.einsum("nk,nk->n", b, grad) + 0.5 * np.einsum("nkl,nkl->n", a, hess)

    def check_bounded(self, domain, n=256, seed=0):
        """Coefficients must be finite on the bounding box grown by the working margin."""
        if self.dim != domain.dim:
            raise InputError(f"coefficients are {self.dim}-dimensional, domain is {domain.dim}")
        lo, hi = (np.asarray(b) for b in domain.bbox)
        rng = np.random.default_rng(seed)
        X = rng.uniform(lo - domain.working_margin, hi + domain.working_margin, size=(n, self.dim))
        if not (np.all(np.isfinite(self.drift(X))) and np.all(np.isfinite(self.sigma(X)))):
            raise InputError("diffusion coefficients are not finite on the working region")

    def to_dict(self):
        if self.kind == "builtin":
            return {"kind": "builtin", "name": self.name, "dimension": self.dim, **self.params}
        if self.kind == "constant":
            return {"kind": "constant", "drift": self.b0.tolist(), "sigma": self.S0.tolist()}
        return {"kind": "affine", "drift": self.b0.tolist(), "drift_matrix": self.B.tolist(),
                "sigma": self.S0.tolist(), "sigma_slopes": self.S1.tolist()}

    @classmethod
    def from_dict(cls, d, dim=None):
        kind = d.get("kind")
        try:
            if kind == "builtin":
                params = {k: v for k, v in d.items() if k not in ("kind", "name", "dimension")}
                return cls.builtin(d["name"], int(d.get("dimension", dim)), **params)
            if kind == "constant":
                return cls.constant(d["drift"], d["sigma"])
            if kind == "affine":
                return cls.affine(d["drift"], d["drift_matrix"], d["sigma"], d.get("sigma_slopes"))
        except KeyError as exc:
            raise InputError(f"coefficients missing field {exc}") from None
        raise InputError(f"unknown coefficient kind {kind!r}")


@dataclass(frozen=True)
class BoundaryBehavior:
    """Oblique reflection by micro-steps of length ``delta``, or nonlocal jumps
    to ``targets`` (one fixed point, or a uniform choice among several)."""

    kind: str = "reflect"
    delta: float = 1e-3
    targets: tuple = ()

    def __post_init__(self):
        if self.kind not in ("reflect", "nonlocal"):
            raise InputError(f"boundary behavior must be 'reflect' or 'nonlocal', got {self.kind!r}")
        check_positive(self.delta, "delta")
        if self.kind == "nonlocal" and not self.targets:
            raise InputError("nonlocal behavior needs at least one target point")
        object.__setattr__(self, "targets", tuple(tuple(map(float, t)) for t in self.targets))

    @classmethod
    def reflect(cls, delta):
        return cls("reflect", delta)

    @classmethod
    def nonlocal_jump(cls, targets, delta=1e-3):
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        return cls("nonlocal", delta, tuple(map(tuple, targets)))

    def target_array(self, dim):
        if not self.targets:
            return np.zeros((1, dim))
        return as_points(self.targets, dim, "targets")

    def validate(self, domain):
        if self.kind == "nonlocal":
            T = self.target_array(domain.dim)
            if not np.all(domain.values(T) > domain.boundary_tol):
                raise InputError("nonlocal targets must lie in the open domain")

    def to_dict(self):
        out = {"kind": self.kind, "delta": self.delta}
        if self.targets:
            out["targets"] = [list(t) for t in self.targets]
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("kind", "reflect"), float(d.get("delta", 1e-3)),
                   tuple(tuple(t) for t in d.get("targets", ())))


@dataclass
class ControlledPath:
    """Event records of one path. Record k holds the state after event k; Y
    sits at ``y[k]`` on [s[k], s[k+1]). Atoms are (s, x, u, mass) with x the
    pre-push state; for nonlocal atoms u is the jump target."""

    s: np.ndarray
    y: np.ndarray
    lambda0: np.ndarray
    lambda1: np.ndarray
    kind: np.ndarray
    face: np.ndarray
    complete: np.ndarray
    atom_s: np.ndarray
    atom_x: np.ndarray
    atom_u: np.ndarray
    atom_mass: np.ndarray
    atom_face: np.ndarray
    step_base: np.ndarray
    step_dW: np.ndarray
    step_chunks: np.ndarray
    dt: float
    delta: float
    seed: int
    path: int
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.s.size

    @property
    def dim(self):
        return self.y.shape[1]

    @property
    def terminal(self):
        return {"s": float(self.s[-1]), "lambda0": float(self.lambda0[-1]),
                "lambda1": float(self.lambda1[-1]), "y": self.y[-1].tolist()}

    def clock_residual(self):
        """Largest relative violation of lambda0 + lambda1 = s over the records."""
        scale = np.maximum(np.abs(self.s), 1.0)
        return float(np.max(np.abs(self.lambda0 + self.lambda1 - self.s) / scale))

    def state_at(self, s):
        """Y(s) for the right-continuous jump path."""
        if s < 0 or s > self.s[-1]:
            raise OutOfRange(f"controlled time {s} outside [0, {self.s[-1]}]")
        k = int(np.searchsorted(self.s, s, side="right")) - 1
        return self.y[k].copy()

    def summary(self):
        return {
            "path": self.path,
            "seed": self.seed,
            "records": len(self),
            "atoms": int(self.atom_s.size),
            "s": float(self.s[-1]),
            "lambda0": float(self.lambda0[-1]),
            "lambda1": float(self.lambda1[-1]),
            "clock_residual": self.clock_residual(),
            **{f"y{k}": float(v) for k, v in enumerate(self.y[-1])},
        }

    def to_dict(self):
        return {
            "seed": self.seed, "path": self.path, "dt": self.dt, "delta": self.delta,
            "records": {"s": self.s.tolist(), "y": self.y.tolist(),
                        "lambda0": self.lambda0.tolist(), "lambda1": self.lambda1.tolist(),
                        "kind": self.kind.tolist(), "face": self.face.tolist()},
            "atoms": {"s": self.atom_s.tolist(), "x": self.atom_x.tolist(),
                      "u": self.atom_u.tolist(), "mass": self.atom_mass.tolist(),
                      "face": self.atom_face.tolist()},
            "meta": self.meta,
        }


def _check_numerics(dt, delta):
    check_positive(dt, "dt")
    check_positive(delta, "delta")
    if delta > math.sqrt(dt) * (1 + 1e-12):
        raise InputError(f"delta={delta} must not exceed sqrt(dt)={math.sqrt(dt):.6g}")


def _step_count(lambda0_target, dt):
    return int(math.ceil(lambda0_target / dt - 1e-9))


def _raise_status(status, what):
    if status == K.ESCAPED:
        raise EscapedWorkingRegion(
            f"{what} left the working region and sub-stepping could not recover; reduce dt")
    if status == K.NONFINITE:
        raise NonFiniteState(f"{what} produced a non-finite state")
    if status == K.DEGENERATE:
        raise DegenerateDirection(f"{what}: a reflection block had zero net displacement")


def _controlled_buffers(cap, d, q):
    return K.Buffers(
        rec=[np.empty(4 * cap), np.empty((4 * cap, d)), np.empty(4 * cap), np.empty(4 * cap),
             np.empty(4 * cap, np.int8), np.empty(4 * cap, np.int32), np.empty(4 * cap, np.bool_)],
        atom=[np.empty(cap), np.empty((cap, d)), np.empty((cap, d)), np.empty(cap),
              np.empty(cap, np.int32)],
        step=[np.empty((cap, d)), np.empty((cap, q)), np.empty(cap, np.int32)],
    )


def simulate_controlled(domain, coeffs, behavior, y0, dt, delta=None, lambda0_target=None,
                        s_budget=None, seed=0, path=0, select_mode="first"):
    """One path of the slow-clock scheme. Stops once ``lambda0_target`` worth of
    diffusion steps have completed, or at the end of the first event that
    takes s to ``s_budget`` or beyond."""
    delta = behavior.delta if delta is None else delta
    _check_numerics(dt, delta)
    if lambda0_target is None and s_budget is None:
        raise InputError("give lambda0_target or s_budget")
    if select_mode not in SELECT_MODES:
        raise InputError(f"select_mode must be one of {sorted(SELECT_MODES)}")
    if coeffs.dim != domain.dim:
        raise InputError(f"coefficients are {coeffs.dim}-dimensional, domain is {domain.dim}")
    y0 = as_point(y0, domain.dim, "y0")
    if classify(domain, y0).kind == "outside":
        raise InputError(f"y0={y0.tolist()} is outside the working region")
    n_steps = _step_count(lambda0_target, dt) if lambda0_target is not None else 2**62
    budget = math.inf if s_budget is None else float(s_budget)
    if lambda0_target is not None:
        check_positive(lambda0_target, "lambda0_target")
    targets = behavior.target_array(domain.dim)
    bcode = K.BEHAVIOR_REFLECT if behavior.kind == "reflect" else K.BEHAVIOR_NONLOCAL
    d, q = domain.dim, coeffs.noise_dim
    est_steps = n_steps if lambda0_target is not None else int(min(budget / dt, 1e6)) + 1
    cap = min(est_steps, 10**6) + 64
    max_micro = int(math.ceil(10 * domain.working_margin / delta)) + 100
    bufs = _controlled_buffers(cap, d, q)
    ws = K.workspace(len(domain.faces), d, q)
    y, dy = y0.copy(), np.zeros(d)
    fstate, istate = np.zeros(3), np.zeros(K.I_SIZE, dtype=np.int64)
    while True:
        status = K.run_controlled(
            domain.compiled, float(dt), float(delta), PHI_SCALE * delta,
            SELECT_MODES[select_mode], bcode, targets,
            coeffs.b0, coeffs.B, coeffs.S0, coeffs.S1, n_steps, budget,
            int(seed), int(path), float(domain.working_margin), CHUNK_FRACTION, max_micro,
            y, dy, fstate, istate, *bufs.flat("rec", "atom", "step"), *ws)
        if status != K.CAPACITY:
            break
        bufs.grow_full({"rec": istate[K.I_REC] + 1, "atom": istate[K.I_ATOM] + 1,
                        "step": istate[K.I_STEP] + 1})
    _raise_status(status, f"path {path}")
    rec = bufs.trimmed("rec", istate[K.I_REC])
    atoms = bufs.trimmed("atom", istate[K.I_ATOM])
    steps = bufs.trimmed("step", istate[K.I_STEP])
    return ControlledPath(*rec, *atoms, *steps, float(dt), float(delta), int(seed), int(path),
                          {"behavior": behavior.kind, "select_mode": select_mode})


def map_paths(fn, n_paths, workers=None):
    """``[fn(p) for p in range(n_paths)]`` on a thread pool; order is preserved."""
    check_count(n_paths, "paths")
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1:
        return [fn(p) for p in range(n_paths)]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, range(n_paths)))


def simulate_paths(domain, coeffs, behavior, y0, dt, n_paths, seed=0, workers=None, **kw):
    return map_paths(lambda p: simulate_controlled(domain, coeffs, behavior, y0, dt,
                                                   seed=seed, path=p, **kw),
                     n_paths, workers)


def select_reflection_face(domain, y, delta=1e-3, mode="first"):
    """Face used for the next reflection micro-step at an exterior point ``y``."""
    y = as_point(y, domain.dim, "y")
    psi, grad = domain.values_and_gradients(y[None, :])
    psi, grad = psi[0], grad[0]
    if not np.any(psi <= 0):
        raise NoViolatedFace(f"no face is violated at {y.tolist()}")
    d = domain.dim
    return int(select_face(domain.compiled, y, psi, grad, PHI_SCALE * delta,
                           SELECT_MODES[mode], np.empty(d), np.empty(d)))


def phi_gradient(domain, y, delta=1e-3):
    """Gradient of the smoothed violation indicator sum_i chi(-psi_i / eps)."""
    y = as_point(y, domain.dim, "y")
    psi, grad = domain.values_and_gradients(y[None, :])
    eps = PHI_SCALE * delta
    r = -psi[0] / eps
    w = np.where((r > 0) & (r < 1), 30 * r**2 * (1 - r) ** 2, 0.0) / eps
    return -(w[:, None] * grad[0]).sum(axis=0)


def restart_path(path, at):
    """Suffix of ``path`` after controlled time ``at`` with all clocks rebased to 0."""
    s_end = path.s[-1]
    if not 0 <= at <= s_end:
        raise OutOfRange(f"restart time {at} outside [0, {s_end}]")
    if at == 0:
        return path
    k = int(np.searchsorted(path.s, at, side="right")) - 1
    # clocks at `at`: interpolate along the event that straddles it
    if k + 1 < len(path) and path.s[k] < at:
        frac = (at - path.s[k]) / (path.s[k + 1] - path.s[k])
        l0 = path.lambda0[k] + frac * (path.lambda0[k + 1] - path.lambda0[k])
        l1 = path.lambda1[k] + frac * (path.lambda1[k + 1] - path.lambda1[k])
    else:
        l0, l1 = path.lambda0[k], path.lambda1[k]
    keep = slice(k + 1, None)
    s = np.concatenate([[0.0], path.s[keep] - at])
    y = np.vstack([path.y[k:k + 1], path.y[keep]])
    lam0 = np.concatenate([[0.0], path.lambda0[keep] - l0])
    lam1 = np.concatenate([[0.0], path.lambda1[keep] - l1])
    kind = np.concatenate([[K.KIND_INIT], path.kind[keep]]).astype(np.int8)
    face = np.concatenate([[-1], path.face[keep]])
    complete = np.concatenate([[path.complete[k]], path.complete[keep]])
    # atoms whose push interval ends after `at`; a straddling atom keeps its remaining mass
    ends = path.atom_s + path.atom_mass
    a = ends > at
    atom_s = np.maximum(path.atom_s[a] - at, 0.0)
    atom_mass = np.where(path.atom_s[a] < at, ends[a] - at, path.atom_mass[a])
    meta = dict(path.meta, restarted_at=float(at))
    return ControlledPath(s, y, lam0, lam1, kind, face, complete,
                          atom_s, path.atom_x[a], path.atom_u[a], atom_mass, path.atom_face[a],
                          path.step_base, path.step_dW, path.step_chunks,
                          path.dt, path.delta, path.seed, path.path, meta)
