"""Piecewise smooth domains given as intersections of level sets.

The domain is ``{x : psi_i(x) > 0 for all i}``. Each face carries a
reflection field ``g^i`` that is normalized to unit length whenever it is
evaluated.
"""

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.stats import qmc

from . import _geomkern as gk
from ._validation import as_point, as_points, check_positive
from .errors import (BoundarySamplingFailed, EmptyScriptI, InputError, NonFiniteGeometry,
                     NotOnBoundary)

MAX_FACES = 16


def _terms_to_arrays(terms, dim):
    coefs = np.array([float(c) for c, _ in terms], dtype=float)
    exps = np.array([list(e) for _, e in terms], dtype=np.int64).reshape(len(terms), dim)
    if np.any(exps < 0):
        raise InputError("polynomial exponents must be nonnegative")
    return coefs, exps


def _check_terms(terms, dim, what):
    if not terms:
        raise InputError(f"{what}: empty polynomial")
    for c, e in terms:
        if len(e) != dim:
            raise InputError(f"{what}: exponent tuple {e} does not have length {dim}")
        if not np.isfinite(float(c)):
            raise InputError(f"{what}: non-finite coefficient")


def _norm_terms(terms):
    return tuple((float(c), tuple(int(v) for v in e)) for c, e in terms)


@dataclass(frozen=True)
class ReflectionSpec:
    """Reflection field of one face: ``constant``, ``rotated_normal`` or ``polynomial``."""

    kind: str
    vector: tuple = None
    angle: float = 0.0
    components: tuple = None

    @classmethod
    def constant(cls, vector):
        return cls("constant", vector=tuple(float(v) for v in vector))

    @classmethod
    def rotated_normal(cls, angle=0.0):
        return cls("rotated_normal", angle=float(angle))

    @classmethod
    def polynomial(cls, components):
        return cls("polynomial", components=tuple(_norm_terms(c) for c in components))

    def validate(self, dim):
        if self.kind == "constant":
            v = np.asarray(self.vector, dtype=float)
            if v.shape != (dim,) or not np.all(np.isfinite(v)) or np.linalg.norm(v) == 0:
                raise InputError(f"constant reflection must be a nonzero {dim}-vector")
        elif self.kind == "rotated_normal":
            if dim != 2 and self.angle != 0.0:
                raise InputError("rotated_normal with a nonzero angle is only defined for d = 2")
        elif self.kind == "polynomial":
            if self.components is None or len(self.components) != dim:
                raise InputError(f"polynomial reflection needs {dim} components")
            for c in self.components:
                _check_terms(c, dim, "polynomial reflection")
        else:
            raise InputError(f"unknown reflection kind {self.kind!r}")

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "vector": list(self.vector)}
        if self.kind == "rotated_normal":
            return {"kind": "rotated_normal", "angle": self.angle}
        return {"kind": "polynomial",
                "components": [[[c, list(e)] for c, e in comp] for comp in self.components]}

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(d["vector"])
        if kind in ("rotated_normal", "normal"):
            return cls.rotated_normal(d.get("angle", 0.0))
        if kind == "polynomial":
            return cls.polynomial(d["components"])
        raise InputError(f"unknown reflection kind {kind!r}")


@dataclass(frozen=True)
class FaceSpec:
    """One face ``{psi = 0}`` of the domain.

    Kinds: ``halfspace`` (psi = <normal, x> - offset), ``ball``
    (psi = r^2 - |x - c|^2, sign flipped for ``orientation='outside'``),
    ``polynomial`` (list of ``(coef, exponents)`` terms) and
    ``piecewise_polynomial`` (``terms`` where ``x[axis] >= 0``,
    ``negative_terms`` elsewhere).
    """

    kind: str
    reflection: ReflectionSpec = field(default_factory=ReflectionSpec.rotated_normal)
    normal: tuple = None
    offset: float = 0.0
    center: tuple = None
    radius: float = None
    orientation: str = "inside"
    terms: tuple = None
    negative_terms: tuple = None
    axis: int = None

    @classmethod
    def halfspace(cls, normal, offset=0.0, reflection=None):
        n = np.asarray(normal, dtype=float)
        nn = np.linalg.norm(n)
        if nn == 0 or not np.isfinite(nn):
            raise InputError("halfspace normal must be a nonzero finite vector")
        return cls("halfspace", reflection or ReflectionSpec.rotated_normal(),
                   normal=tuple(n / nn), offset=float(offset))

    @classmethod
    def ball(cls, center, radius, orientation="inside", reflection=None):
        return cls("ball", reflection or ReflectionSpec.rotated_normal(),
                   center=tuple(float(c) for c in center), radius=float(radius),
                   orientation=orientation)

    @classmethod
    def polynomial(cls, terms, reflection=None):
        return cls("polynomial", reflection or ReflectionSpec.rotated_normal(),
                   terms=_norm_terms(terms))

    @classmethod
    def piecewise_polynomial(cls, axis, terms, negative_terms, reflection=None):
        return cls("piecewise_polynomial", reflection or ReflectionSpec.rotated_normal(),
                   terms=_norm_terms(terms), negative_terms=_norm_terms(negative_terms),
                   axis=int(axis))

    @property
    def dim(self):
        if self.kind == "halfspace":
            return len(self.normal)
        if self.kind == "ball":
            return len(self.center)
        return len(self.terms[0][1])

    def pieces(self):
        """Polynomial terms for the ``x[axis] >= 0`` and ``x[axis] < 0`` pieces."""
        d = self.dim
        if self.kind == "halfspace":
            terms = [(-self.offset, (0,) * d)]
            for k, nk in enumerate(self.normal):
                if nk != 0.0:
                    e = [0] * d
                    e[k] = 1
                    terms.append((nk, tuple(e)))
            return terms, None
        if self.kind == "ball":
            sign = 1.0 if self.orientation == "inside" else -1.0
            c = np.asarray(self.center)
            terms = [(sign * (self.radius ** 2 - float(c @ c)), (0,) * d)]
            for k in range(d):
                e1 = [0] * d
                e1[k] = 1
                e2 = [0] * d
                e2[k] = 2
                terms.append((sign * 2.0 * c[k], tuple(e1)))
                terms.append((-sign, tuple(e2)))
            return terms, None
        if self.kind == "polynomial":
            return list(self.terms), None
        return list(self.terms), list(self.negative_terms)

    def validate(self, dim=None):
        if self.kind not in ("halfspace", "ball", "polynomial", "piecewise_polynomial"):
            raise InputError(f"unknown face kind {self.kind!r}")
        d = self.dim if dim is None else dim
        if self.dim != d:
            raise InputError(f"face dimension {self.dim} does not match domain dimension {d}")
        if self.kind == "ball":
            check_positive(self.radius, "ball radius")
            if self.orientation not in ("inside", "outside"):
                raise InputError("ball orientation must be 'inside' or 'outside'")
        if self.kind in ("polynomial", "piecewise_polynomial"):
            _check_terms(self.terms, d, "face")
        if self.kind == "piecewise_polynomial":
            _check_terms(self.negative_terms, d, "face")
            if not 0 <= self.axis < d:
                raise InputError("piecewise_polynomial axis out of range")
        self.reflection.validate(d)

    def to_dict(self):
        out = {"kind": self.kind, "reflection": self.reflection.to_dict()}
        if self.kind == "halfspace":
            out.update(normal=list(self.normal), offset=self.offset)
        elif self.kind == "ball":
            out.update(center=list(self.center), radius=self.radius, orientation=self.orientation)
        else:
            out["terms"] = [[c, list(e)] for c, e in self.terms]
            if self.kind == "piecewise_polynomial":
                out["negative_terms"] = [[c, list(e)] for c, e in self.negative_terms]
                out["axis"] = self.axis
        return out

    @classmethod
    def from_dict(cls, d):
        refl = ReflectionSpec.from_dict(d.get("reflection", {"kind": "rotated_normal"}))
        kind = d.get("kind")
        if kind == "halfspace":
            return cls.halfspace(d["normal"], d.get("offset", 0.0), refl)
        if kind == "ball":
            return cls.ball(d["center"], d["radius"], d.get("orientation", "inside"), refl)
        if kind == "polynomial":
            return cls.polynomial(d["terms"], refl)
        if kind == "piecewise_polynomial":
            return cls.piecewise_polynomial(d["axis"], d["terms"], d["negative_terms"], refl)
        raise InputError(f"unknown face kind {kind!r}")

    @cached_property
    def compiled(self):
        return compile_faces([self], self.dim)


def compile_faces(faces, dim):
    m = len(faces)
    pieces = [f.pieces() for f in faces]
    tmax = max(max(len(p), len(q) if q else 0) for p, q in pieces)
    exps = np.zeros((m, 2, tmax, dim), dtype=np.int64)
    coefs = np.zeros((m, 2, tmax))
    nterms = np.zeros((m, 2), dtype=np.int64)
    split = np.full(m, -1, dtype=np.int64)
    for i, (pos, neg) in enumerate(pieces):
        for piece, terms in enumerate((pos, neg)):
            if terms is None:
                continue
            c, e = _terms_to_arrays(terms, dim)
            coefs[i, piece, :len(c)] = c
            exps[i, piece, :len(c)] = e
            nterms[i, piece] = len(c)
        if neg is not None:
            split[i] = faces[i].axis

    fkind = np.zeros(m, dtype=np.int64)
    fvec = np.zeros((m, dim))
    fpar = np.zeros((m, 2))
    for i, f in enumerate(faces):
        if f.kind == "halfspace":
            fkind[i] = gk.FACE_HALFSPACE
            fvec[i] = f.normal
            fpar[i, 0] = f.offset
        elif f.kind == "ball":
            fkind[i] = gk.FACE_BALL
            fvec[i] = f.center
            fpar[i] = (f.radius ** 2, 1.0 if f.orientation == "inside" else -1.0)

    rkind = np.zeros(m, dtype=np.int64)
    rconst = np.zeros((m, dim))
    rangle = np.zeros(m)
    comps = [f.reflection.components for f in faces if f.reflection.kind == "polynomial"]
    trmax = max([len(t) for c in comps for t in c], default=1)
    rexps = np.zeros((m, dim, trmax, dim), dtype=np.int64)
    rcoefs = np.zeros((m, dim, trmax))
    rnterms = np.zeros((m, dim), dtype=np.int64)
    for i, f in enumerate(faces):
        r = f.reflection
        if r.kind == "constant":
            rkind[i] = gk.REFL_CONSTANT
            rconst[i] = r.vector
        elif r.kind == "rotated_normal":
            rkind[i] = gk.REFL_ROTATED_NORMAL
            rangle[i] = r.angle
        else:
            rkind[i] = gk.REFL_POLYNOMIAL
            for k, terms in enumerate(r.components):
                c, e = _terms_to_arrays(terms, dim)
                rcoefs[i, k, :len(c)] = c
                rexps[i, k, :len(c)] = e
                rnterms[i, k] = len(c)
    return gk.CompiledDomain(fkind, fvec, fpar, exps, coefs, nterms, split, rkind, rconst,
                             np.cos(rangle), np.sin(rangle), rexps, rcoefs, rnterms)


@dataclass(frozen=True)
class DomainSpec:
    faces: tuple
    dim: int
    bbox: tuple
    working_margin: float = None
    boundary_tol: float = None
    probe_radius: float = None
    n_probe_samples: int = 256

    def __post_init__(self):
        object.__setattr__(self, "faces", tuple(self.faces))
        lo, hi = (np.asarray(b, dtype=float) for b in self.bbox)
        object.__setattr__(self, "bbox", (tuple(lo), tuple(hi)))
        if self.working_margin is None:
            object.__setattr__(self, "working_margin", 0.1 * self.diameter)
        if self.boundary_tol is None:
            object.__setattr__(self, "boundary_tol", 1e-9 * self.diameter)
        if self.probe_radius is None:
            object.__setattr__(self, "probe_radius", 1e-3 * self.diameter)
        self.validate()

    @property
    def m(self):
        return len(self.faces)

    @property
    def diameter(self):
        lo, hi = (np.asarray(b) for b in self.bbox)
        return float(np.linalg.norm(hi - lo))

    def validate(self):
        if self.dim < 1:
            raise InputError("domain dimension must be >= 1")
        if not 1 <= self.m <= MAX_FACES:
            raise InputError(f"a domain needs between 1 and {MAX_FACES} faces, got {self.m}")
        for f in self.faces:
            f.validate(self.dim)
        lo, hi = (np.asarray(b) for b in self.bbox)
        if lo.shape != (self.dim,) or hi.shape != (self.dim,) or np.any(hi <= lo):
            raise InputError("bbox must be (lo, hi) with lo < hi componentwise")
        check_positive(self.working_margin, "working_margin")
        check_positive(self.boundary_tol, "boundary_tol")
        check_positive(self.probe_radius, "probe_radius")
        if self.boundary_tol >= self.working_margin:
            raise InputError("boundary_tol must be smaller than working_margin")

    @cached_property
    def compiled(self):
        return compile_faces(self.faces, self.dim)

    def to_dict(self):
        return {
            "dimension": self.dim,
            "faces": [f.to_dict() for f in self.faces],
            "bbox": [list(self.bbox[0]), list(self.bbox[1])],
            "working_margin": self.working_margin,
            "boundary_tol": self.boundary_tol,
            "probe_radius": self.probe_radius,
            "n_probe_samples": self.n_probe_samples,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            faces = [FaceSpec.from_dict(f) for f in d["faces"]]
            return cls(faces=faces, dim=int(d["dimension"]), bbox=tuple(d["bbox"]),
                       working_margin=d.get("working_margin"),
                       boundary_tol=d.get("boundary_tol"),
                       probe_radius=d.get("probe_radius"),
                       n_probe_samples=int(d.get("n_probe_samples", 256)))
        except KeyError as exc:
            raise InputError(f"domain spec missing field {exc}") from None

    # vectorized helpers ------------------------------------------------

    def values(self, X):
        """psi_i at each row of X, shape (n, m)."""
        X = as_points(X, self.dim)
        out = gk.values_points(self.compiled, X)
        if not np.all(np.isfinite(out)):
            raise NonFiniteGeometry("non-finite level-set value")
        return out

    def values_and_gradients(self, X):
        X = as_points(X, self.dim)
        psi, grad = gk.eval_points(self.compiled, X)
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(grad))):
            raise NonFiniteGeometry("non-finite level-set value or gradient")
        return psi, grad

    def reflections(self, X, faces=None):
        """Unit g^i at each row of X, shape (n, m, d); restricted to ``faces`` if given."""
        X = as_points(X, self.dim)
        out = gk.reflections_points(self.compiled, X)
        if faces is not None:
            out = out[:, list(faces)]
        if not np.all(np.isfinite(out)):
            raise NonFiniteGeometry("reflection field vanishes or is non-finite")
        return out

    def contains(self, X, tol=None):
        """Membership in the closed domain, with slack ``tol`` (default boundary_tol)."""
        tol = self.boundary_tol if tol is None else tol
        return np.all(self.values(X) >= -tol, axis=1)


def evaluate_face(face, x):
    """Return ``(psi(x), grad psi(x))`` for a single face."""
    x = as_point(x, face.dim)
    cd = face.compiled
    grad = np.empty(face.dim)
    val = gk.face_value_grad(cd, 0, x, grad)
    if not (np.isfinite(val) and np.all(np.isfinite(grad))):
        raise NonFiniteGeometry(f"face evaluation overflowed at {x}")
    return float(val), grad


class Classification(NamedTuple):
    kind: str  # interior | boundary | exterior | outside
    active: tuple


def _depth_estimate(psi, grad):
    gn = np.linalg.norm(grad, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(psi < 0, -psi / gn, 0.0)
    return float(np.max(np.nan_to_num(depth, nan=np.inf)))


def classify(domain, x):
    x = as_point(x, domain.dim)
    psi, grad = domain.values_and_gradients(x[None, :])
    psi, grad = psi[0], grad[0]
    tol = domain.boundary_tol
    active = tuple(int(i) for i in np.flatnonzero(psi <= tol))
    if np.all(psi > tol):
        return Classification("interior", ())
    if np.all(psi >= -tol):
        return Classification("boundary", active)
    if _depth_estimate(psi, grad) <= domain.working_margin:
        return Classification("exterior", active)
    return Classification("outside", active)


def _require_boundary(domain, x):
    c = classify(domain, x)
    if c.kind != "boundary":
        raise NotOnBoundary(f"{tuple(np.round(x, 12))} is {c.kind}, not on the boundary")
    return c.active


def _probe_directions(domain, x, normals):
    d = domain.dim
    dirs = []
    k = len(normals)
    for r in range(1, k + 1):
        for S in itertools.combinations(range(k), r):
            v = -np.sum(normals[list(S)], axis=0)
            nv = np.linalg.norm(v)
            if nv > 1e-12:
                dirs.append(v / nv)
    eye = np.eye(d)
    dirs.extend(eye)
    dirs.extend(-eye)
    if d == 2:
        for n in normals:
            t = np.array([-n[1], n[0]])
            dirs.extend([t, -t])
    if domain.n_probe_samples > 0:
        if d == 1:
            qr = np.array([[1.0], [-1.0]])
        else:
            z = qmc.MultivariateNormalQMC(np.zeros(d), seed=12345).random(domain.n_probe_samples)
            qr = z / np.linalg.norm(z, axis=1, keepdims=True)
        dirs.extend(qr)
    return np.array(dirs)


def realizable_exterior_subsets(domain, x, ladder=24):
    """Index sets realized as I(z) by exterior points z close to boundary point x.

    Probes ``z = x + t v`` for directions ``v`` built from negated sums of
    active normals, coordinate axes, tangents and quasi-random unit vectors,
    over a geometric ladder of radii ``t <= probe_radius``.
    """
    x = as_point(x, domain.dim)
    active = _require_boundary(domain, x)
    psi, grad = domain.values_and_gradients(x[None, :])
    normals = grad[0, list(active)]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    dirs = _probe_directions(domain, x, normals)
    radii = domain.probe_radius * 0.5 ** np.arange(ladder)
    Z = (x[None, None, :] + radii[:, None, None] * dirs[None, :, :]).reshape(-1, domain.dim)
    vals = domain.values(Z)
    exterior = np.any(vals < 0, axis=1)
    act = set(active)
    found = set()
    for row in vals[exterior]:
        I = frozenset(int(i) for i in np.flatnonzero(row <= 0))
        if I and I <= act:
            found.add(I)
    if not found:
        raise EmptyScriptI(f"no exterior probe succeeded near {x}")
    return sorted((tuple(sorted(I)) for I in found), key=lambda t: (len(t), t))


def reflection_cone(domain, x):
    """Generators ``[(i, g^i(x))]`` of the reflection cone at a boundary point."""
    x = as_point(x, domain.dim)
    active = _require_boundary(domain, x)
    g = domain.reflections(x[None, :])[0]
    return [(i, g[i]) for i in active]


@dataclass
class LocalBoundaryData:
    point: np.ndarray
    active: tuple
    normals: np.ndarray      # (k, d), rows ordered as ``active``
    reflections: np.ndarray  # (k, d)
    script_i: tuple = None   # realizable exterior index sets, global face labels

    def local_index(self, i):
        return self.active.index(i)


def local_boundary_data(domain, x, with_script_i=True):
    x = as_point(x, domain.dim)
    active = _require_boundary(domain, x)
    psi, grad = domain.values_and_gradients(x[None, :])
    ng = grad[0, list(active)]
    gn = np.linalg.norm(ng, axis=1, keepdims=True)
    if np.any(gn == 0):
        raise NonFiniteGeometry(f"vanishing face gradient on the boundary at {x}")
    g = domain.reflections(x[None, :], active)[0]
    script = tuple(realizable_exterior_subsets(domain, x)) if with_script_i else None
    return LocalBoundaryData(x, active, ng / gn, g, script)


def _project(domain, X, faces, iters=50):
    """Gauss-Newton projection of each row of X onto the joint zero set of ``faces``."""
    X = X.copy()
    idx = list(faces)
    for _ in range(iters):
        psi, grad = gk.eval_points(domain.compiled, X)
        r = psi[:, idx]
        J = grad[:, idx, :]
        step = np.einsum("ndk,nk->nd", np.linalg.pinv(J), r)
        X -= step
        if np.all(np.abs(r) < 1e-15 * (1 + domain.diameter)):
            break
    return X


def sample_boundary(domain, n, seed=0, bbox=None):
    """Boundary points stratified over faces and face intersections.

    Returns ``(points, strata)``; each stratum is the tuple of faces a point
    was projected onto.
    """
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(b, dtype=float) for b in (bbox or domain.bbox))
    d, m = domain.dim, domain.m
    strata = [(i,) for i in range(m)]
    for r in range(2, min(d, m) + 1):
        strata.extend(itertools.combinations(range(m), r))
    tol = domain.boundary_tol

    def draw(S, want):
        pts = []
        for attempt in range(20):
            cand = lo + (hi - lo) * rng.random((max(4 * want, 64), d))
            proj = _project(domain, cand, S)
            if not np.all(np.isfinite(proj)):
                proj = proj[np.all(np.isfinite(proj), axis=1)]
            vals = domain.values(proj) if len(proj) else np.empty((0, m))
            ok = (np.all(np.abs(vals[:, list(S)]) <= tol, axis=1)
                  & np.all(vals >= -tol, axis=1)
                  & np.all((proj >= lo) & (proj <= hi), axis=1))
            pts.extend(proj[ok])
            if len(pts) >= want:
                break
        return pts

    per = max(1, -(-n // len(strata)))
    found = []
    for S in strata:
        pts = draw(S, per)
        if len(S) > 1 and pts:
            pts = list(np.unique(np.round(np.array(pts), 10), axis=0))
        found.append((S, pts))
    # empty intersections leave a shortfall; the single faces make it up
    short = n - sum(len(pts) for _, pts in found)
    faces = [k for k, (S, pts) in enumerate(found) if len(S) == 1 and pts]
    if short > 0 and faces:
        extra = -(-short // len(faces))
        for k in faces:
            found[k][1].extend(draw(found[k][0], extra))
    corners = [(S, p) for S, pts in found if len(S) > 1 for p in pts]
    out = corners[:n]
    queues = [[(S, p) for p in pts] for S, pts in found if len(S) == 1]
    k = 0
    while len(out) < n and any(k < len(q) for q in queues):
        out.extend(q[k] for q in queues if k < len(q))
        k += 1
    out = out[:n]
    if not out:
        raise BoundarySamplingFailed("rejection sampling produced no boundary points")
    return np.array([p for _, p in out]), [S for S, _ in out]


def near_boundary_candidates(domain, x, radius):
    """Local boundary data at every boundary point obtained by projecting ``x``
    onto a subset of the faces within distance ``radius`` (first-order estimate
    psi / |grad psi|), nearest first.

    Used for states of a discretized path, which sit near but not exactly on
    the boundary. Near a cusp several faces can be that close.
    """
    x = as_point(x, domain.dim)
    psi, grad = domain.values_and_gradients(x[None, :])
    gn = np.linalg.norm(grad[0], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(gn > 0, psi[0] / gn, np.where(psi[0] > 0, np.inf, 0.0))
    near = tuple(int(i) for i in np.flatnonzero(dist <= radius))
    tol = 1e-8 * (1.0 + domain.diameter)
    found = []
    for r in range(1, min(len(near), domain.dim) + 1):
        for S in itertools.combinations(near, r):
            p = _project(domain, x[None, :], S)[0]
            vals = domain.values(p[None, :])[0]
            if not (np.all(np.isfinite(vals)) and np.all(np.abs(vals[list(S)]) <= tol)
                    and np.all(vals >= -tol)):
                continue
            active = tuple(int(i) for i in np.flatnonzero(np.abs(vals) <= tol))
            _, g2 = domain.values_and_gradients(p[None, :])
            ng = g2[0, list(active)]
            nn = np.linalg.norm(ng, axis=1, keepdims=True)
            if np.any(nn == 0):
                continue
            local = LocalBoundaryData(p, active, ng / nn,
                                      domain.reflections(p[None, :], active)[0], None)
            found.append((float(np.linalg.norm(p - x)), len(found), local))
    return [c[2] for c in sorted(found, key=lambda c: c[:2])]


def near_boundary_data(domain, x, radius):
    """Nearest entry of ``near_boundary_candidates`` or ``None``."""
    found = near_boundary_candidates(domain, x, radius)
    return found[0] if found else None
