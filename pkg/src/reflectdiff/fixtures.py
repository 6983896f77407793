"""Builtin domains.

``lens_domain``: unit disk centred at (1, 0) cut by the upper half-plane, with
both reflection fields equal to the inward normal rotated by a fixed angle.
``cusp_domain``: 0 < x1, -x1^4 < x2 < x1^2, |x| < 1, whose two curved faces
meet tangentially at the origin. ``cusp_domain_split`` describes the same set
with the first two faces extended across x1 = 0 by odd/even reflection.
"""

import math

import numpy as np

from .geometry import DomainSpec, FaceSpec, ReflectionSpec

CUSP_G1 = (-0.5, math.sqrt(3.0) / 2.0)
CUSP_G2 = (math.sqrt(2.0) / 2.0, -math.sqrt(2.0) / 2.0)
CUSP_G4 = (1.0, 0.0)


def lens_domain(angle=math.pi / 4, **kw):
    rot = ReflectionSpec.rotated_normal(angle)
    faces = [
        FaceSpec.ball((1.0, 0.0), 1.0, reflection=rot),
        FaceSpec.halfspace((0.0, 1.0), 0.0, reflection=rot),
    ]
    return DomainSpec(faces, 2, ((0.0, -1.0), (2.0, 1.0)), **kw)


def cusp_domain(**kw):
    faces = [
        FaceSpec.polynomial([(1.0, (0, 1)), (1.0, (4, 0))], ReflectionSpec.constant(CUSP_G1)),
        FaceSpec.polynomial([(1.0, (2, 0)), (-1.0, (0, 1))], ReflectionSpec.constant(CUSP_G2)),
        FaceSpec.ball((0.0, 0.0), 1.0),
        FaceSpec.halfspace((1.0, 0.0), 0.0, ReflectionSpec.constant(CUSP_G4)),
    ]
    return DomainSpec(faces, 2, ((-1.0, -1.0), (1.0, 1.0)), **kw)


def cusp_domain_split(**kw):
    faces = [
        FaceSpec.piecewise_polynomial(
            0, [(1.0, (0, 1)), (1.0, (4, 0))], [(1.0, (0, 1)), (-1.0, (4, 0))],
            ReflectionSpec.constant(CUSP_G1)),
        FaceSpec.piecewise_polynomial(
            0, [(1.0, (2, 0)), (-1.0, (0, 1))], [(-1.0, (2, 0)), (-1.0, (0, 1))],
            ReflectionSpec.constant(CUSP_G2)),
        FaceSpec.ball((0.0, 0.0), 1.0),
    ]
    return DomainSpec(faces, 2, ((-1.0, -1.0), (1.0, 1.0)), **kw)


def half_line(**kw):
    """[0, inf) with reflection +1; the bbox only bounds sampling and the working margin."""
    return DomainSpec([FaceSpec.halfspace((1.0,), 0.0)], 1, ((0.0,), (10.0,)), **kw)


def interval(a=0.0, b=1.0, **kw):
    faces = [FaceSpec.halfspace((1.0,), a), FaceSpec.halfspace((-1.0,), -b)]
    return DomainSpec(faces, 1, ((a,), (b,)), **kw)


def unit_box(dim=2, **kw):
    faces = []
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = 1.0
        faces.append(FaceSpec.halfspace(e, 0.0))
        faces.append(FaceSpec.halfspace(-e, -1.0))
    return DomainSpec(faces, dim, ((0.0,) * dim, (1.0,) * dim), **kw)


def oblique_quadrant(g1=(1.0, 0.5), g2=(0.5, 1.0), size=2.0, **kw):
    """Square [0, size]^2 with constant oblique reflection on the two faces through 0."""
    faces = [
        FaceSpec.halfspace((1.0, 0.0), 0.0, ReflectionSpec.constant(g1)),
        FaceSpec.halfspace((0.0, 1.0), 0.0, ReflectionSpec.constant(g2)),
        FaceSpec.halfspace((-1.0, 0.0), -size),
        FaceSpec.halfspace((0.0, -1.0), -size),
    ]
    return DomainSpec(faces, 2, ((0.0, 0.0), (size, size)), **kw)


DOMAINS = {
    "lens": lens_domain,
    "cusp": cusp_domain,
    "cusp_split": cusp_domain_split,
    "half_line": half_line,
    "interval": interval,
    "unit_box": unit_box,
    "oblique_quadrant": oblique_quadrant,
}
