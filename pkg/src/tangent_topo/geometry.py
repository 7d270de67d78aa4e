"""Convex polyhedra, vertex truncation, and polygonal-polar charts.

A convex polyhedron is stored with outward-oriented face cycles; edges
are always derived from the face cycles, never supplied.  Truncation
cuts every vertex off with a separating plane, producing a truncated
polyhedron whose boundary consists of *corner faces* (one small polygon
per original vertex, called cleaved faces) and *trimmed faces* (the
remnants of the original faces, called truncated faces).

All types are immutable after construction and every operation is a
pure function, so the module is safe to use from multiple threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import (
    BasePointOutside,
    DegenerateCut,
    GeometryError,
    SeparationViolation,
)
from .sphere import normalized

TOL_GEOM_FACTOR = 1e-9

POLYHEDRON_FORMAT = "polyhedron/1"

FaceKey = Tuple[str, int]

CLEAVED = "cleaved"
TRUNCATED = "truncated"


def _newell_normal(points: np.ndarray) -> np.ndarray:
    nxt = np.roll(points, -1, axis=0)
    return np.cross(points, nxt).sum(axis=0)


@dataclass(frozen=True)
class ConvexPolyhedron:
    """A convex polyhedron with outward counterclockwise face cycles."""

    vertices: np.ndarray
    faces: Tuple[Tuple[int, ...], ...]
    edges: np.ndarray            # (e, 2) vertex pairs, low index first
    edge_faces: np.ndarray       # (e, 2): face traversing i->j, face traversing j->i
    face_normals: np.ndarray
    centroid: np.ndarray
    tol: float

    @classmethod
    def from_data(cls, vertices, faces) -> "ConvexPolyhedron":
        """Build and validate a polyhedron from raw vertex/face data.

        Face cycles may have either orientation on input; they are
        reoriented outward with a centroid test.  Raises GeometryError
        if the data fails planarity, convexity, manifoldness, or the
        Euler formula.
        """
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise GeometryError("vertices must be an (n, 3) array")
        if verts.shape[0] < 4:
            raise GeometryError("a polyhedron needs at least 4 vertices")
        bbox = verts.max(axis=0) - verts.min(axis=0)
        tol = TOL_GEOM_FACTOR * float(np.linalg.norm(bbox))
        if tol == 0.0:
            raise GeometryError("degenerate vertex set")
        centroid = verts.mean(axis=0)

        oriented = []
        normals = []
        for cycle in faces:
            cycle = [int(i) for i in cycle]
            if len(cycle) < 3 or len(set(cycle)) != len(cycle):
                raise GeometryError(f"bad face cycle {cycle}")
            pts = verts[cycle]
            normal = _newell_normal(pts)
            nn = float(np.linalg.norm(normal))
            if nn < tol:
                raise GeometryError(f"degenerate face {cycle}")
            normal = normal / nn
            if normal @ (pts.mean(axis=0) - centroid) < 0.0:
                cycle = cycle[::-1]
                normal = -normal
            pts = verts[cycle]
            spread = np.abs((pts - pts[0]) @ normal)
            if spread.max() > 10.0 * tol:
                raise GeometryError(f"face {cycle} is not planar")
            oriented.append(tuple(cycle))
            normals.append(normal)
        normals = np.asarray(normals)

        # Convexity: every vertex on or behind every face plane.
        for cyc, normal in zip(oriented, normals):
            dist = (verts - verts[cyc[0]]) @ normal
            if dist.max() > 10.0 * tol:
                raise GeometryError("polyhedron is not convex")

        edge_map: dict[tuple[int, int], list[Optional[int]]] = {}
        for ci, cyc in enumerate(oriented):
            for k in range(len(cyc)):
                i, j = cyc[k], cyc[(k + 1) % len(cyc)]
                key = (min(i, j), max(i, j))
                slot = 0 if i < j else 1
                rec = edge_map.setdefault(key, [None, None])
                if rec[slot] is not None:
                    raise GeometryError(f"edge {key} traversed twice in one direction")
                rec[slot] = ci
        for key, rec in edge_map.items():
            if rec[0] is None or rec[1] is None:
                raise GeometryError(f"edge {key} is not shared by two faces")

        keys = sorted(edge_map)
        edges = np.asarray(keys, dtype=int)
        edge_faces = np.asarray([edge_map[k] for k in keys], dtype=int)

        v, e, f = verts.shape[0], edges.shape[0], len(oriented)
        if v - e + f != 2:
            raise GeometryError(f"Euler check failed: {v} - {e} + {f} != 2")

        return cls(
            vertices=verts,
            faces=tuple(oriented),
            edges=edges,
            edge_faces=edge_faces,
            face_normals=normals,
            centroid=centroid,
            tol=tol,
        )

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def edge_index(self, i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        idx = np.flatnonzero((self.edges[:, 0] == key[0]) & (self.edges[:, 1] == key[1]))
        if idx.size != 1:
            raise GeometryError(f"no edge {key}")
        return int(idx[0])

    def edge_direction(self, b: int) -> np.ndarray:
        i, j = self.edges[b]
        return normalized(self.vertices[j] - self.vertices[i])

    def to_dict(self) -> dict:
        return {
            "format": POLYHEDRON_FORMAT,
            "vertices": [[float(x) for x in v] for v in self.vertices],
            "faces": [list(map(int, f)) for f in self.faces],
        }


_BUILTINS = {
    "cube": (
        [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1),
         (1, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1)],
        [[0, 1, 3, 2], [4, 6, 7, 5], [0, 4, 5, 1],
         [2, 3, 7, 6], [0, 2, 6, 4], [1, 5, 7, 3]],
    ),
    "tetrahedron": (
        [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)],
        [[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]],
    ),
    "octahedron": (
        [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)],
        [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
         [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]],
    ),
}

BUILTIN_NAMES = tuple(sorted(_BUILTINS))


def builtin_polyhedron(name: str) -> ConvexPolyhedron:
    """One of the built-in solids: cube, tetrahedron, octahedron."""
    try:
        verts, faces = _BUILTINS[name]
    except KeyError:
        raise GeometryError(f"unknown builtin polyhedron {name!r}") from None
    return ConvexPolyhedron.from_data(verts, faces)


def polyhedron_from_dict(data: dict) -> ConvexPolyhedron:
    if data.get("format", POLYHEDRON_FORMAT) != POLYHEDRON_FORMAT:
        raise GeometryError(f"unsupported polyhedron format {data.get('format')!r}")
    return ConvexPolyhedron.from_data(data["vertices"], data["faces"])


def load_polyhedron(path) -> ConvexPolyhedron:
    with open(path, "r", encoding="utf-8") as fh:
        return polyhedron_from_dict(json.load(fh))


def save_polyhedron(poly: ConvexPolyhedron, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(poly.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class TruncationSpec:
    """One separating cut plane per vertex.

    ``normals[a]`` points from the body toward vertex ``a`` and
    ``points[a]`` lies on the plane, so the kept half-space at vertex a
    is ``(x - points[a]) . normals[a] <= 0``.
    """

    normals: np.ndarray
    points: np.ndarray

    @classmethod
    def from_fraction(cls, poly: ConvexPolyhedron, lam: float) -> "TruncationSpec":
        """Generate cuts from a single fraction of local edge length.

        Each plane faces the polyhedron centroid and sits ``lam`` times
        the nearest-neighbor vertex distance in from its vertex.  Small
        fractions always separate on a convex polyhedron; overly deep
        cuts are rejected later by the truncation's interaction checks.
        """
        if not (0.0 < lam):
            raise GeometryError(f"truncation fraction must be positive, got {lam}")
        verts = poly.vertices
        normals = np.empty_like(verts)
        points = np.empty_like(verts)
        for a in range(poly.n_vertices):
            nn = np.inf
            for b in poly.edges[(poly.edges == a).any(axis=1)]:
                other = int(b[1] if b[0] == a else b[0])
                nn = min(nn, float(np.linalg.norm(verts[other] - verts[a])))
            normal = normalized(verts[a] - poly.centroid)
            normals[a] = normal
            points[a] = verts[a] - lam * nn * normal
        return cls(normals=normals, points=points)


@dataclass(frozen=True)
class CleavedEdge:
    """Border between a corner face and a trimmed face.

    The stored direction runs counterclockwise about the trimmed face's
    outward normal: from the crossing on the edge entering the corner in
    that face's cycle (``start_edge``) to the crossing on the leaving
    edge (``end_edge``).
    """

    vertex: int
    face: int
    start_point: int
    end_point: int
    start_edge: int
    end_edge: int


@dataclass(frozen=True)
class TruncatedFace:
    face: int
    polygon: Tuple[int, ...]
    # ("cleaved", (a, c), True) or ("edge", b, forward); forward is True
    # when the cycle walks edge b from its low-index endpoint.
    segments: Tuple[Tuple[str, object, bool], ...]


@dataclass(frozen=True)
class CleavedFace:
    vertex: int
    polygon: Tuple[int, ...]        # counterclockwise about the cut normal
    face_chain: Tuple[int, ...]     # incident original faces, same cyclic order


@dataclass(frozen=True)
class TruncatedPolyhedron:
    """A polyhedron with every vertex cut off by a separating plane."""

    parent: ConvexPolyhedron
    spec: TruncationSpec
    points: np.ndarray                       # (2e, 3) cut corner points
    trunc_edges: np.ndarray                  # (e, 2) point indices, parent low->high
    trunc_faces: Tuple[TruncatedFace, ...]
    cleaved_faces: Tuple[CleavedFace, ...]
    cleaved_edges: dict

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_edges(self) -> int:
        return self.parent.n_edges + len(self.cleaved_edges)

    @property
    def n_faces(self) -> int:
        return len(self.trunc_faces) + len(self.cleaved_faces)

    def cut_normal(self, a: int) -> np.ndarray:
        return self.spec.normals[a]

    def face_normal(self, c: int) -> np.ndarray:
        return self.parent.face_normals[c]

    def face_keys(self) -> Tuple[FaceKey, ...]:
        keys = [(TRUNCATED, c) for c in range(len(self.trunc_faces))]
        keys += [(CLEAVED, a) for a in range(len(self.cleaved_faces))]
        return tuple(keys)

    def face_polygon(self, key: FaceKey) -> Tuple[int, ...]:
        kind, idx = key
        if kind == TRUNCATED:
            return self.trunc_faces[idx].polygon
        return self.cleaved_faces[idx].polygon

    def face_outward_normal(self, key: FaceKey) -> np.ndarray:
        kind, idx = key
        return self.face_normal(idx) if kind == TRUNCATED else self.cut_normal(idx)

    def fan_edge_cycle(self, a: int) -> Tuple[int, ...]:
        """Truncated edges around corner ``a``, ordered so consecutive
        ones are linked by a cleaved edge traversed in its stored
        direction, anchored at the lowest edge index."""
        cf = self.cleaved_faces[a]
        ccw = [self.cleaved_edges[(a, c)].end_edge for c in cf.face_chain]
        fwd = ccw[::-1]
        k = fwd.index(min(fwd))
        return tuple(fwd[k:] + fwd[:k])

    def validate(self) -> None:
        """Check closure and alternation invariants; raises on failure."""
        # Boundary of the boundary: each cleaved edge once per side,
        # opposite directions.
        fwd = {}
        for tf in self.trunc_faces:
            poly = tf.polygon
            for k, seg in enumerate(tf.segments):
                if seg[0] == "cleaved":
                    fwd[seg[1]] = (poly[k], poly[(k + 1) % len(poly)])
            kinds = [seg[0] for seg in tf.segments]
            for k in range(len(kinds)):
                if kinds[k] == kinds[(k + 1) % len(kinds)]:
                    raise GeometryError("face boundary does not alternate edge kinds")
        seen = set()
        for cf in self.cleaved_faces:
            poly = cf.polygon
            for k, c in enumerate(cf.face_chain):
                key = (cf.vertex, c)
                rev = (poly[(k + 1) % len(poly)], poly[k])
                if fwd.get(key) != rev:
                    raise GeometryError("cleaved edge orientations do not cancel")
                seen.add(key)
        if seen != set(self.cleaved_edges):
            raise GeometryError("cleaved edge registry mismatch")
        v = self.n_points
        e = self.n_edges
        f = self.n_faces
        if v - e + f != 2:
            raise GeometryError(f"Euler check failed on truncation: {v}-{e}+{f}")


def truncate(poly: ConvexPolyhedron, spec: TruncationSpec) -> TruncatedPolyhedron:
    """Cut every vertex of ``poly`` off with its plane from ``spec``.

    Raises SeparationViolation when a plane fails to isolate its vertex
    and DegenerateCut when a plane grazes a vertex or two cuts meet, in
    particular when a truncated edge would collapse to a point.
    """
    verts = poly.vertices
    tol = poly.tol
    v = poly.n_vertices
    sides = np.einsum("vj,aj->av", verts, spec.normals) - np.einsum(
        "aj,aj->a", spec.points, spec.normals
    )[:, None]
    for a in range(v):
        if np.any(np.abs(sides[a]) <= tol):
            raise DegenerateCut(f"cut plane {a} passes through a vertex")
        if sides[a, a] < 0.0:
            raise SeparationViolation(f"cut plane {a} faces away from its vertex")
        others = np.delete(sides[a], a)
        if np.any(others > 0.0):
            raise SeparationViolation(f"cut plane {a} does not separate its vertex")

    e = poly.n_edges
    points = np.empty((2 * e, 3), dtype=float)

    def pt_index(b: int, vertex: int) -> int:
        return 2 * b + (0 if vertex == int(poly.edges[b, 0]) else 1)

    for b in range(e):
        i, j = (int(x) for x in poly.edges[b])
        for vertex, other in ((i, j), (j, i)):
            t = sides[vertex, vertex] / (sides[vertex, vertex] - sides[vertex, other])
            points[pt_index(b, vertex)] = (1.0 - t) * verts[vertex] + t * verts[other]

    # Cuts must not interact: every corner point lies strictly inside all
    # other cut planes.  A violated pair means a collapsed truncated edge
    # or overlapping corner polygons.
    owners = poly.edges.reshape(-1)  # owner vertex per corner point
    d = np.einsum("pj,aj->ap", points, spec.normals) - np.einsum(
        "aj,aj->a", spec.points, spec.normals
    )[:, None]
    for a in range(v):
        own = owners == a
        if np.any(np.abs(d[a, own]) > 10.0 * tol):
            raise GeometryError("internal error: crossing point off its plane")
        if np.any(d[a, ~own] > -tol):
            raise DegenerateCut("cut planes interact; shrink the truncation")

    trunc_edges = np.empty((e, 2), dtype=int)
    for b in range(e):
        i, j = (int(x) for x in poly.edges[b])
        trunc_edges[b] = (pt_index(b, i), pt_index(b, j))

    cleaved_edges = {}
    trunc_faces = []
    for c, cyc in enumerate(poly.faces):
        m = len(cyc)
        polygon = []
        segments = []
        for k in range(m):
            prv, cur, nxt = cyc[(k - 1) % m], cyc[k], cyc[(k + 1) % m]
            b_in = poly.edge_index(prv, cur)
            b_out = poly.edge_index(cur, nxt)
            p_in = pt_index(b_in, cur)
            p_out = pt_index(b_out, cur)
            polygon.extend((p_in, p_out))
            segments.append(("cleaved", (cur, c), True))
            segments.append(("edge", b_out, cur == int(poly.edges[b_out, 0])))
            cleaved_edges[(cur, c)] = CleavedEdge(
                vertex=cur, face=c,
                start_point=p_in, end_point=p_out,
                start_edge=b_in, end_edge=b_out,
            )
        trunc_faces.append(TruncatedFace(face=c, polygon=tuple(polygon),
                                         segments=tuple(segments)))

    # Corner polygons: chain the incident faces so each border edge is
    # walked opposite to its direction in the trimmed face, which makes
    # the polygon counterclockwise about the outward cut normal.
    enter = {}
    for (a, c), ce in cleaved_edges.items():
        enter.setdefault(a, {})[c] = ce.start_edge
    cleaved_faces = []
    for a in range(v):
        faces_at = enter[a]
        start = min(faces_at)
        chain = [start]
        while True:
            b_enter = faces_at[chain[-1]]
            f1, f2 = (int(x) for x in poly.edge_faces[b_enter])
            nxt = f2 if f1 == chain[-1] else f1
            if nxt == start:
                break
            chain.append(nxt)
            if len(chain) > len(faces_at):
                raise GeometryError("corner face chain did not close")
        if len(chain) != len(faces_at):
            raise GeometryError("corner face chain missed a face")
        polygon = tuple(cleaved_edges[(a, c)].end_point for c in chain)
        normal = _newell_normal(points[list(polygon)])
        if normal @ spec.normals[a] <= 0.0:
            raise GeometryError("internal error: corner polygon orientation")
        cleaved_faces.append(CleavedFace(vertex=a, polygon=polygon,
                                         face_chain=tuple(chain)))

    phat = TruncatedPolyhedron(
        parent=poly,
        spec=spec,
        points=points,
        trunc_edges=trunc_edges,
        trunc_faces=tuple(trunc_faces),
        cleaved_faces=tuple(cleaved_faces),
        cleaved_edges=cleaved_edges,
    )
    phat.validate()
    return phat


@dataclass(frozen=True)
class ChartSegment:
    kind: str            # "cleaved" or "edge"
    key: object          # (a, c) or edge index b
    forward: bool        # True if chart direction matches the stored direction


@dataclass(frozen=True)
class PolarChart:
    """Polygonal-polar coordinates on a convex face.

    ``point(rho, phi)`` is ``rho * z(phi) + (1 - rho) * base`` where
    ``z`` walks the boundary with constant speed on each side, one equal
    phi-span per side, starting (phi = 0) at the corner with the lowest
    point index and running counterclockwise about the outward normal.
    """

    corners: np.ndarray                 # (m, 3) anchored cycle
    base: np.ndarray
    normal: np.ndarray
    segments: Tuple[ChartSegment, ...]
    frame: Tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        w1, w2 = self.frame
        rel = self.corners - self.base
        object.__setattr__(self, "_corners2d",
                           np.stack([rel @ w1, rel @ w2], axis=1))

    @property
    def n_segments(self) -> int:
        return self.corners.shape[0]

    def boundary_point(self, phi) -> np.ndarray:
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        m = self.n_segments
        span = 2.0 * np.pi / m
        pos = np.mod(phi, 2.0 * np.pi) / span
        k = np.minimum(pos.astype(int), m - 1)
        u = pos - k
        q0 = self.corners[k]
        q1 = self.corners[(k + 1) % m]
        return (1.0 - u)[:, None] * q0 + u[:, None] * q1

    def point(self, rho, phi) -> np.ndarray:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        z = self.boundary_point(phi)
        return rho[:, None] * z + (1.0 - rho)[:, None] * self.base

    def segment_span(self, k: int) -> Tuple[float, float]:
        span = 2.0 * np.pi / self.n_segments
        return k * span, (k + 1) * span

    def segment_index(self, kind: str, key) -> int:
        for k, seg in enumerate(self.segments):
            if seg.kind == kind and seg.key == key:
                return k
        raise GeometryError(f"face has no boundary segment {kind} {key}")

    def locate(self, point) -> Tuple[float, float]:
        """Invert the chart at a single in-plane point."""
        p = np.asarray(point, dtype=float)
        w1, w2 = self.frame
        x = np.array([(p - self.base) @ w1, (p - self.base) @ w2])
        r = float(np.hypot(*x))
        scale = float(np.max(np.linalg.norm(self._corners2d, axis=1)))
        if r < 1e-14 * scale:
            return 0.0, 0.0
        m = self.n_segments
        c2 = self._corners2d
        for k in range(m):
            q0, q1 = c2[k], c2[(k + 1) % m]
            mat = np.array([[q1[0] - q0[0], -x[0]], [q1[1] - q0[1], -x[1]]])
            det = float(np.linalg.det(mat))
            if abs(det) < 1e-18:
                continue
            u, tau = np.linalg.solve(mat, -q0)
            if -1e-9 <= u <= 1.0 + 1e-9 and tau >= 1.0 - 1e-9:
                span = 2.0 * np.pi / m
                phi = (k + float(np.clip(u, 0.0, 1.0))) * span
                return float(min(1.0, 1.0 / tau)), phi
        raise BasePointOutside("point does not project into the face")


def _face_segments(phat: TruncatedPolyhedron, key: FaceKey):
    kind, idx = key
    if kind == TRUNCATED:
        tf = phat.trunc_faces[idx]
        polygon = list(tf.polygon)
        segs = [ChartSegment(s[0], s[1], s[2]) for s in tf.segments]
    else:
        cf = phat.cleaved_faces[idx]
        polygon = list(cf.polygon)
        segs = [ChartSegment("cleaved", (cf.vertex, c), False) for c in cf.face_chain]
    return polygon, segs


def polar_chart(
    phat: TruncatedPolyhedron,
    key: FaceKey,
    base_point=None,
) -> PolarChart:
    """Polygonal-polar chart for a face of the truncated polyhedron.

    The default base point is the polygon centroid; an explicit base
    point must lie strictly inside the face.
    """
    polygon, segs = _face_segments(phat, key)
    pts = phat.points[polygon]
    normal = phat.face_outward_normal(key)
    base = pts.mean(axis=0) if base_point is None else np.asarray(base_point, float)

    scale = float(np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))
    if abs((base - pts[0]) @ normal) > 1e-7 * scale:
        raise BasePointOutside("base point is off the face plane")
    m = len(polygon)
    for k in range(m):
        q0, q1 = pts[k], pts[(k + 1) % m]
        inward = np.cross(normal, q1 - q0)
        if (base - q0) @ inward <= 1e-9 * scale:
            raise BasePointOutside("base point is not strictly inside the face")

    anchor = int(np.argmin(polygon))
    polygon = polygon[anchor:] + polygon[:anchor]
    segs = segs[anchor:] + segs[:anchor]
    corners = phat.points[polygon]

    w1 = normalized(corners[0] - base)
    w2 = normalized(np.cross(normal, w1))
    return PolarChart(
        corners=corners,
        base=base,
        normal=normal,
        segments=tuple(segs),
        frame=(w1, w2),
    )
