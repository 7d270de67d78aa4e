"""Shared fixtures and independent oracles for the test suite."""
from __future__ import annotations

import numpy as np

from tangent_topo import AnalyticField, ImageMesh
from tangent_topo.sphere import geodesic_point, normalized


# --- independent spherical-area oracle ---------------------------------------

def lhuilier_signed_area(a, b, c) -> float:
    """Signed triangle area via L'Huilier's excess formula.

    Independent of the arctangent identity used by the library: computes
    the excess from the three side lengths and attaches the orientation
    sign from the triple product.
    """
    a, b, c = (normalized(v) for v in (a, b, c))

    def side(u, v):
        return float(np.arctan2(np.linalg.norm(np.cross(u, v)), u @ v))

    sa, sb, sc = side(b, c), side(c, a), side(a, b)
    s = 0.5 * (sa + sb + sc)
    prod = (
        np.tan(0.5 * s)
        * np.tan(0.5 * (s - sa))
        * np.tan(0.5 * (s - sb))
        * np.tan(0.5 * (s - sc))
    )
    excess = 4.0 * np.arctan(np.sqrt(max(prod, 0.0)))
    orient = float(np.cross(a, b) @ c)
    return float(np.copysign(excess, orient)) if orient != 0.0 else excess


# --- brute-force unwrapping oracle --------------------------------------------

def brute_force_rotation_angle(curve, axis, samples: int = 20001) -> float:
    """Accumulated rotation angle by very fine uniform sampling."""
    axis = normalized(axis)
    t = np.linspace(0.0, 1.0, samples)
    pts = np.asarray([normalized(curve(tk)) for tk in t])
    u, v = pts[:-1], pts[1:]
    steps = np.arctan2(np.cross(u, v) @ axis, np.einsum("ij,ij->i", u, v))
    return float(np.sum(steps))


# --- rotations ----------------------------------------------------------------

def rotation_matrix(axis, angle) -> np.ndarray:
    axis = normalized(axis)
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def random_rotation(rng) -> np.ndarray:
    return rotation_matrix(rng.normal(size=3), rng.uniform(0.0, 2.0 * np.pi))


# --- sphere triangulations -----------------------------------------------------

def icosahedron_mesh() -> ImageMesh:
    """Identity map on an icosahedral triangulation."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    raw = []
    for x in (-1.0, 1.0):
        for y in (-phi, phi):
            raw.extend([(x, y, 0.0), (0.0, x, y), (y, 0.0, x)])
    verts = np.asarray([normalized(v) for v in raw])
    edge2 = 4.0 / (1.0 + phi * phi)  # squared edge length after normalization
    tris = []
    n = len(verts)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                d2 = (
                    np.linalg.norm(verts[i] - verts[j]) ** 2,
                    np.linalg.norm(verts[j] - verts[k]) ** 2,
                    np.linalg.norm(verts[k] - verts[i]) ** 2,
                )
                if all(abs(x - edge2) < 1e-6 for x in d2):
                    tri = [i, j, k]
                    normal = np.cross(verts[j] - verts[i], verts[k] - verts[i])
                    if normal @ (verts[i] + verts[j] + verts[k]) < 0:
                        tri = [i, k, j]
                    tris.append(tri)
    assert len(tris) == 20
    return ImageMesh(triangles=np.asarray(tris), images=verts)


def polar_sphere_mesh(n_alpha: int, n_beta: int, image_fn=None):
    """Outward-oriented pole-to-pole triangulation of the sphere.

    ``image_fn(alpha, beta)`` maps grid coordinates to the image point;
    the default is the identity embedding.
    """
    if image_fn is None:
        image_fn = lambda alpha, beta: np.array([
            np.sin(alpha) * np.cos(beta),
            np.sin(alpha) * np.sin(beta),
            np.cos(alpha),
        ])
    verts = [image_fn(0.0, 0.0)]
    index = {}
    for i in range(1, n_alpha):
        alpha = np.pi * i / n_alpha
        for j in range(n_beta):
            beta = 2.0 * np.pi * j / n_beta
            index[(i, j)] = len(verts)
            verts.append(image_fn(alpha, beta))
    south = len(verts)
    verts.append(image_fn(np.pi, 0.0))

    tris = []
    for j in range(n_beta):
        j1 = (j + 1) % n_beta
        tris.append([0, index[(1, j)], index[(1, j1)]])
        tris.append([south, index[(n_alpha - 1, j1)], index[(n_alpha - 1, j)]])
    for i in range(1, n_alpha - 1):
        for j in range(n_beta):
            j1 = (j + 1) % n_beta
            a, b = index[(i, j)], index[(i, j1)]
            c, d = index[(i + 1, j)], index[(i + 1, j1)]
            tris.append([a, c, d])
            tris.append([a, d, b])
    return ImageMesh(triangles=np.asarray(tris), images=np.asarray(verts))


def subdivide_mesh(mesh: ImageMesh) -> ImageMesh:
    """One 4-to-1 subdivision, interpolating new nodes along geodesics."""
    verts = [v for v in mesh.images]
    midpoint = {}

    def mid(i, j):
        key = (min(i, j), max(i, j))
        if key not in midpoint:
            midpoint[key] = len(verts)
            verts.append(geodesic_point(verts[i], verts[j], 0.5))
        return midpoint[key]

    tris = []
    for i, j, k in mesh.triangles:
        ij, jk, ki = mid(i, j), mid(j, k), mid(k, i)
        tris.extend([[i, ij, ki], [ij, j, jk], [ki, jk, k], [ij, jk, ki]])
    return ImageMesh(triangles=np.asarray(tris), images=np.asarray(verts))


# --- scipy half-space truncation oracle ----------------------------------------

def halfspace_truncation_counts(poly, spec):
    """Vertex/edge/face counts of the truncation by brute-force
    half-space intersection (scipy), independent of the combinatorial
    construction under test."""
    from scipy.spatial import ConvexHull, HalfspaceIntersection

    rows = []
    for cyc, n in zip(poly.faces, poly.face_normals):
        rows.append(np.concatenate([n, [-(n @ poly.vertices[cyc[0]])]]))
    for a in range(poly.n_vertices):
        rows.append(np.concatenate([spec.normals[a], [-(spec.normals[a] @ spec.points[a])]]))
    hs = HalfspaceIntersection(np.asarray(rows), poly.centroid.copy())

    scale = float(np.linalg.norm(poly.vertices.max(0) - poly.vertices.min(0)))
    uniq = []
    for p in hs.intersections:
        if not any(np.linalg.norm(p - q) < 1e-7 * scale for q in uniq):
            uniq.append(p)
    pts = np.asarray(uniq)
    hull = ConvexHull(pts)

    groups = {}
    for simplex, eq in zip(hull.simplices, hull.equations):
        key = tuple(np.round(eq / np.linalg.norm(eq[:3]), 6))
        groups.setdefault(key, []).append(simplex)
    edge_faces = {}
    for key, simps in groups.items():
        for tri in simps:
            for u, v in ((0, 1), (1, 2), (2, 0)):
                e = (min(tri[u], tri[v]), max(tri[u], tri[v]))
                edge_faces.setdefault(e, set()).add(key)
    n_edges = sum(1 for s in edge_faces.values() if len(s) == 2)
    return len(pts), n_edges, len(groups)


# --- tangency-preserving perturbations ------------------------------------------

def tangent_perturbation(field: AnalyticField, seed: int,
                         amplitude: float = 0.1) -> AnalyticField:
    """Small tangent homotopy of ``field``: rotations that vanish on
    every face boundary, in-plane on trimmed faces and about a fixed
    axis on corner faces, so tangency, edge values, and all extracted
    invariants are preserved."""
    rng = np.random.default_rng(seed)
    phat = field.host
    params = {}
    for key in phat.face_keys():
        axis = (phat.face_outward_normal(key) if key[0] == "truncated"
                else normalized(rng.normal(size=3)))
        params[key] = (
            float(rng.uniform(0.2, 1.0) * amplitude),
            int(rng.integers(1, 4)),
            float(rng.uniform(0.0, 2.0 * np.pi)),
            axis,
        )

    base_eval = field.evaluate

    def evaluator(key, rho, phi):
        vals = base_eval(key, rho, phi)
        amp, k, phase, axis = params[key]
        if key[0] == "truncated":
            psi = amp * rho * rho * (1.0 - rho) * np.cos(k * phi + phase)
        else:
            psi = amp * rho * (1.0 - rho)
        cosp = np.cos(psi)[:, None]
        sinp = np.sin(psi)[:, None]
        dot = (vals @ axis)[:, None]
        return cosp * vals + sinp * np.cross(axis, vals) + (1.0 - cosp) * dot * axis

    return AnalyticField(host=phat, charts=field.charts, evaluator=evaluator)
