"""Primitives on the unit sphere.

Signed geodesic triangle areas, an oriented point-in-triangle test,
geodesic interpolation, continuous unwrapping of rotation angles for
paths confined to a great circle, and the degree of a discretized sphere
map.  Everything here is a pure function of immutable numpy data and is
safe to call concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    AntipodalEndpoints,
    AntipodalPair,
    CoarseSampling,
    MaxRefinement,
    NotClosed,
    NotInPlane,
    OnBoundary,
    ResolutionTooCoarse,
)

TOL_UNIT = 1e-12
TOL_ANTIPODAL = 1e-9
NYQUIST_STEP = 0.5 * np.pi
DEGREE_RESIDUAL_TOL = 0.1


def normalized(vec) -> np.ndarray:
    """Return ``vec`` scaled to unit length.

    Raises ValueError for a near-zero input instead of returning NaNs.
    """
    v = np.asarray(vec, dtype=float)
    n = float(np.linalg.norm(v))
    if n < 1e-15:
        raise ValueError("cannot normalize a near-zero vector")
    return v / n


def normalized_rows(arr) -> np.ndarray:
    a = np.asarray(arr, dtype=float)
    n = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(n < 1e-15):
        raise ValueError("cannot normalize a near-zero vector")
    return a / n


def _rows(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def triangle_areas(a, b, c):
    """Signed spherical areas of vertex triples, vectorized.

    Returns ``(areas, valid)`` where invalid entries mark degenerate
    triples (an antipodal pair, or a hemisphere-straddling triple whose
    orientation is ambiguous).  Valid areas lie in (-2*pi, 2*pi).
    """
    a, b, c = _rows(a), _rows(b), _rows(c)
    ab = np.einsum("ij,ij->i", a, b)
    bc = np.einsum("ij,ij->i", b, c)
    ca = np.einsum("ij,ij->i", c, a)
    re = 1.0 + ab + bc + ca
    im = np.einsum("ij,ij->i", np.cross(a, b), c)
    areas = 2.0 * np.arctan2(im, re)
    valid = np.hypot(re, im) > 1e-13
    valid &= ~((np.abs(im) <= 1e-13) & (re < 0.0))
    return areas, valid


def triangle_area(a, b, c) -> float:
    """Signed area of the geodesic triangle (a, b, c).

    The area is ``2 arg((1 + a.b + b.c + c.a) + i (a x b).c)`` with the
    argument taken in (-pi, pi], so a positively oriented triangle (seen
    from outside the sphere) has positive area and the triangle interior
    is always the choice with |area| < 2*pi.
    """
    areas, valid = triangle_areas(a, b, c)
    if not bool(valid[0]):
        raise AntipodalPair("triangle has an antipodal or degenerate vertex pair")
    return float(areas[0])


# Canonical public name; `triangle_area` stays as the short module-local form.
def spherical_triangle_area(a, b, c) -> float:
    return triangle_area(a, b, c)


def triangle_sigma(a, b, c, s, tol: float = TOL_ANTIPODAL) -> int:
    """Oriented membership indicator of ``s`` in the triangle (a, b, c).

    Returns 0 when ``s`` is outside the triangle interior (the region
    bounded by the polygon with |area| < 2*pi), otherwise the sign of
    ``(a x b).s``, which equals the orientation of the boundary about s.
    Membership requires the three signs (a x b).s, (b x c).s, (c x a).s
    to agree *and* to match the triangle's own orientation; agreement
    alone would also fire for the antipodal region.
    """
    a, b, c, s = (normalized(v) for v in (a, b, c, s))
    z = np.array([
        float(np.cross(a, b) @ s),
        float(np.cross(b, c) @ s),
        float(np.cross(c, a) @ s),
    ])
    orient = float(np.cross(a, b) @ c)
    o = 0 if abs(orient) < 1e-13 else (1 if orient > 0 else -1)
    tiny = np.abs(z) < tol
    if tiny.any():
        big = z[~tiny]
        if o != 0 and (big.size == 0 or np.all(np.sign(big) == o)):
            raise OnBoundary("reference direction is on a triangle boundary")
        return 0
    signs = np.sign(z)
    if o != 0 and np.all(signs == o):
        return o
    return 0


def geodesic_point(a, b, tau: float) -> np.ndarray:
    """Point at fraction ``tau`` along the shortest arc from a to b."""
    a = normalized(a)
    b = normalized(b)
    d = float(np.clip(a @ b, -1.0, 1.0))
    if d <= -1.0 + TOL_ANTIPODAL:
        raise AntipodalEndpoints("shortest geodesic between antipodes is not unique")
    ang = float(np.arccos(d))
    if ang < 1e-9:
        return normalized((1.0 - tau) * a + tau * b)
    return normalized(
        (np.sin((1.0 - tau) * ang) * a + np.sin(tau * ang) * b) / np.sin(ang)
    )


def geodesic_interpolate(u, v, tau) -> np.ndarray:
    """Row-wise shortest-arc interpolation between unit-vector arrays."""
    u, v = _rows(u), _rows(v)
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (u.shape[0],))
    d = np.clip(np.einsum("ij,ij->i", u, v), -1.0, 1.0)
    if np.any(d <= -1.0 + TOL_ANTIPODAL):
        raise AntipodalEndpoints("antipodal pair in geodesic interpolation")
    ang = np.arccos(d)
    out = np.empty_like(u)
    small = ang < 1e-9
    if small.any():
        t = tau[small, None]
        out[small] = normalized_rows((1.0 - t) * u[small] + t * v[small])
    big = ~small
    if big.any():
        s = np.sin(ang[big])
        w0 = np.sin((1.0 - tau[big]) * ang[big]) / s
        w1 = np.sin(tau[big] * ang[big]) / s
        out[big] = w0[:, None] * u[big] + w1[:, None] * v[big]
    return normalized_rows(out)


def _step_angles(samples: np.ndarray) -> np.ndarray:
    u, v = samples[:-1], samples[1:]
    cr = np.linalg.norm(np.cross(u, v), axis=1)
    dt = np.einsum("ij,ij->i", u, v)
    return np.arctan2(cr, dt)


@dataclass
class SphericalPath:
    """A sampled curve on the sphere with optional adaptive refinement.

    ``params`` are strictly increasing in [0, 1].  ``refine``, when
    given, evaluates the underlying curve at new parameter values; it is
    used to bisect intervals whose samples subtend an angle of pi/2 or
    more, the step bound required for unambiguous unwrapping.
    """

    samples: np.ndarray
    params: np.ndarray
    refine: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.samples = normalized_rows(self.samples)
        self.params = np.asarray(self.params, dtype=float)
        if self.samples.shape[0] != self.params.shape[0]:
            raise ValueError("samples and params length mismatch")
        if self.samples.shape[0] < 2:
            raise ValueError("a path needs at least two samples")
        if np.any(np.diff(self.params) <= 0):
            raise ValueError("params must be strictly increasing")

    def ensure_step_bound(self, bound: float = NYQUIST_STEP, max_rounds: int = 24) -> None:
        """Refine until consecutive samples subtend less than ``bound``."""
        for _ in range(max_rounds):
            bad = _step_angles(self.samples) >= bound
            if not bad.any():
                return
            if self.refine is None:
                raise CoarseSampling(
                    "path violates the step bound and has no refinement callback"
                )
            mid = 0.5 * (self.params[:-1][bad] + self.params[1:][bad])
            values = normalized_rows(self.refine(mid))
            params = np.concatenate([self.params, mid])
            order = np.argsort(params, kind="stable")
            self.params = params[order]
            self.samples = np.concatenate([self.samples, values])[order]
        raise MaxRefinement("path refinement budget exhausted")


def unwrap_rotation_angle(
    path: SphericalPath,
    axis,
    tol_tangency: float = 1e-8,
    max_rounds: int = 24,
) -> float:
    """Accumulated rotation angle of ``path`` about ``axis``.

    The path must lie in the great circle orthogonal to ``axis``.  The
    angle is continuous with value 0 at the start; each refined step
    contributes its signed angle in (-pi/2, pi/2).
    """
    axis = normalized(axis)
    if np.max(np.abs(path.samples @ axis)) > tol_tangency:
        raise NotInPlane("path samples are not orthogonal to the axis")
    path.ensure_step_bound(max_rounds=max_rounds)
    u, v = path.samples[:-1], path.samples[1:]
    steps = np.arctan2(np.cross(u, v) @ axis, np.einsum("ij,ij->i", u, v))
    return float(np.sum(steps))


@dataclass(frozen=True)
class GeodesicPolygon:
    """Closed geodesic polygon given by its ordered vertices."""

    vertices: np.ndarray

    def __post_init__(self):
        verts = normalized_rows(self.vertices)
        object.__setattr__(self, "vertices", verts)
        nxt = np.roll(verts, -1, axis=0)
        dots = np.einsum("ij,ij->i", verts, nxt)
        if np.any(dots >= 1.0 - TOL_UNIT) or np.any(dots <= -1.0 + TOL_UNIT):
            raise AntipodalPair("consecutive polygon vertices equal or antipodal")

    def __len__(self) -> int:
        return self.vertices.shape[0]


@dataclass(frozen=True)
class ImageMesh:
    """A closed oriented triangulation whose nodes carry sphere points.

    ``triangles`` is an (m, 3) integer array; ``images`` an (n, 3) array
    of unit vectors, renormalized on construction.
    """

    triangles: np.ndarray
    images: np.ndarray

    def __post_init__(self):
        tris = np.asarray(self.triangles, dtype=int)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError("triangles must be an (m, 3) index array")
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "images", normalized_rows(self.images))


def _check_closed_oriented(triangles: np.ndarray) -> None:
    directed = {}
    for tri in triangles:
        i, j, k = (int(x) for x in tri)
        if len({i, j, k}) != 3:
            raise NotClosed("triangle with a repeated vertex")
        for e in ((i, j), (j, k), (k, i)):
            directed[e] = directed.get(e, 0) + 1
    for (i, j), count in directed.items():
        if count != 1 or directed.get((j, i), 0) != 1:
            raise NotClosed("every edge must appear once per direction")


def mesh_degree(mesh: ImageMesh, residual_tol: float = DEGREE_RESIDUAL_TOL) -> int:
    """Degree of the piecewise-geodesic sphere map carried by ``mesh``.

    Sums signed triangle areas of the images (a pairwise numpy reduction,
    deterministic for a fixed mesh) and rounds the total divided by 4*pi.
    A pre-rounding residual at or above ``residual_tol`` raises, flagging
    an under-resolved or degenerate mesh rather than mis-rounding.
    """
    _check_closed_oriented(mesh.triangles)
    pts = mesh.images
    t = mesh.triangles
    areas, valid = triangle_areas(pts[t[:, 0]], pts[t[:, 1]], pts[t[:, 2]])
    if not valid.all():
        raise ResolutionTooCoarse("degenerate image triangle; refine the mesh")
    total = float(np.sum(areas)) / (4.0 * np.pi)
    nearest = round(total)
    if abs(total - nearest) >= residual_tol:
        raise ResolutionTooCoarse(
            f"degree residual {abs(total - nearest):.3g} exceeds {residual_tol}"
        )
    return int(nearest)
