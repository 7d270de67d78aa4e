"""Construction of representative boundary fields.

Given an invariant set that satisfies both sum rules, this module
builds an analytic tangent field realizing it: constant values on
truncated edges, uniform-speed rotations along cleaved edges, an
angle-lift contraction on trimmed faces (the boundary loop has zero
winding exactly when the kink rule holds, so the contraction is a
plain straight-line homotopy of lifted angles), and on each corner
face a geodesic contraction of the boundary to the antipode of the
reference direction wrapped around an explicit sphere covering whose
multiplicity is the wrapping number.

Only the boundary field is built.  The wrapping sum rule is the
admissibility certificate that an interior extension exists; the
artifact never constructs one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import (
    GeodesicAntipodal,
    NonzeroWinding,
    NotInPlane,
    ParallelEndpoints,
    SumRuleViolation,
)
from .fields import CLEAVED, TRUNCATED, AnalyticField, charts_for
from .geometry import TruncatedPolyhedron
from .invariants import (
    InvariantSet,
    check_sum_rules,
    choose_reference_s,
    face_opposition_count,
    s_margin,
)
from .sphere import SphericalPath, geodesic_interpolate, normalized


def reference_frame(s) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal pair (xi, eta) with xi x eta = -s."""
    s = normalized(s)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(s)))] = 1.0
    xi = normalized(np.cross(s, axis))
    eta = np.cross(xi, s)
    return xi, eta


def covering_patch(rho, phi, omega: int, xi, eta, s) -> np.ndarray:
    """Sphere covering of multiplicity ``omega`` in polar face coordinates.

    Returns ``sin(2 pi rho) cos(omega phi) xi + sin(2 pi rho) sin(omega
    phi) eta + cos(2 pi rho) s``; the value is ``s`` at rho = 0 and
    ``-s`` on the whole rho = 1/2 circle.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    rho, phi = np.broadcast_arrays(rho, phi)
    sr = np.sin(2.0 * np.pi * rho)
    return (
        (sr * np.cos(omega * phi))[:, None] * np.asarray(xi)
        + (sr * np.sin(omega * phi))[:, None] * np.asarray(eta)
        + np.cos(2.0 * np.pi * rho)[:, None] * np.asarray(s)
    )


@dataclass(frozen=True)
class LoopContraction:
    """Family ``h_rho(t)`` contracting a winding-zero in-plane loop.

    ``h_1`` is the loop, ``h_0`` the constant direction at the loop's
    start angle; intermediate members scale the lifted angle function.
    """

    params: np.ndarray
    thetas: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    def __call__(self, rho, t) -> np.ndarray:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rho, t = np.broadcast_arrays(rho, t)
        theta = np.interp(t, self.params, self.thetas)
        full = rho * theta + (1.0 - rho) * self.thetas[0]
        return np.cos(full)[:, None] * self.u1 + np.sin(full)[:, None] * self.u2


def face_loop_contraction(loop: SphericalPath, normal) -> LoopContraction:
    """Explicit contraction of a closed loop in the plane normal to
    ``normal``; raises NonzeroWinding if the loop is not contractible."""
    normal = normalized(normal)
    if float(np.max(np.abs(loop.samples @ normal))) > 1e-8:
        raise NotInPlane("loop does not lie in the plane of the axis")
    loop.ensure_step_bound()
    u1 = normalized(loop.samples[0])
    u2 = np.cross(normal, u1)
    u, v = loop.samples[:-1], loop.samples[1:]
    steps = np.arctan2(np.cross(u, v) @ normal, np.einsum("ij,ij->i", u, v))
    thetas = np.concatenate([[0.0], np.cumsum(steps)])
    if abs(thetas[-1] - thetas[0]) > 1e-6:
        raise NonzeroWinding(
            f"loop winds {thetas[-1] / (2 * np.pi):.3f} turns; cannot contract"
        )
    return LoopContraction(params=loop.params.copy(), thetas=thetas, u1=u1, u2=u2)


@dataclass(frozen=True)
class AdmissibleInvariants:
    """An invariant set whose sum rules have been verified, with the
    reference frame used by the covering patch."""

    invariants: InvariantSet
    xi: np.ndarray
    eta: np.ndarray

    @classmethod
    def from_invariants(cls, inv: InvariantSet,
                        phat: TruncatedPolyhedron) -> "AdmissibleInvariants":
        verdicts = check_sum_rules(inv, phat)
        if not verdicts.all_ok:
            bad = [v.face for v in verdicts.kink_rules if not v.ok]
            parts = []
            if bad:
                parts.append(f"kink rule fails on faces {bad}")
            if not verdicts.wrapping_ok:
                parts.append(
                    f"wrapping numbers sum to {verdicts.wrapping_total}, not 0"
                )
            raise SumRuleViolation("; ".join(parts))
        if s_margin(phat, inv.s) < 1e-9:
            raise GeodesicAntipodal(
                "reference direction lies in a face plane; boundary values "
                "could hit it"
            )
        xi, eta = reference_frame(inv.s)
        return cls(invariants=inv, xi=xi, eta=eta)


def _spiral_parts(phat, eps, kinks, a, c):
    ce = phat.cleaved_edges[(a, c)]
    axis = phat.face_normal(c)
    e0 = eps[ce.start_edge]
    e1 = eps[ce.end_edge]
    sin_eta = float(np.cross(e0, e1) @ axis)
    cos_eta = float(e0 @ e1)
    if abs(sin_eta) < 1e-12:
        raise ParallelEndpoints(
            f"consecutive edge orientations parallel at corner {a}, face {c}"
        )
    eta = float(np.arctan2(sin_eta, cos_eta))
    total = eta + 2.0 * np.pi * kinks[(a, c)]
    return e0, np.cross(axis, e0), total


def representative_boundary(
    adm: AdmissibleInvariants,
    phat: TruncatedPolyhedron,
    charts=None,
) -> AnalyticField:
    """Analytic boundary field whose invariants are ``adm.invariants``."""
    inv = adm.invariants
    eps = inv.edge_orientations
    s = inv.s
    minus_s = -s
    charts = charts or charts_for(phat)

    trunc_data = {}
    for c in range(len(phat.trunc_faces)):
        chart = charts[(TRUNCATED, c)]
        normal = phat.face_normal(c)
        segs = chart.segments
        if segs[0].kind == "edge":
            b0 = segs[0].key
        else:
            b0 = segs[-1].key
        u1 = eps[b0]
        u2 = np.cross(normal, u1)
        knots = [0.0]
        for seg in segs:
            if seg.kind == "edge":
                knots.append(knots[-1])
            else:
                a_, c_ = seg.key
                _, _, total = _spiral_parts(phat, eps, inv.kink_numbers, a_, c_)
                knots.append(knots[-1] + total)
        knots = np.asarray(knots)
        if abs(knots[-1] - knots[0]) > 1e-9:
            raise NonzeroWinding(
                f"face {c} boundary loop winds; kink data inconsistent"
            )
        trunc_data[c] = (u1, u2, knots)

    cleaved_data = {}
    for a, cf in enumerate(phat.cleaved_faces):
        chart = charts[(CLEAVED, a)]
        e0s, axcs, totals = [], [], []
        for seg in chart.segments:
            a_, c_ = seg.key
            e0, axc, total = _spiral_parts(phat, eps, inv.kink_numbers, a_, c_)
            e0s.append(e0)
            axcs.append(axc)
            totals.append(total)
        cleaved_data[a] = (
            np.asarray(e0s), np.asarray(axcs), np.asarray(totals),
            int(inv.wrapping_numbers[a]),
        )

    xi, eta = adm.xi, adm.eta

    def evaluator(key, rho, phi):
        kind, idx = key
        m = charts[key].n_segments
        span = 2.0 * np.pi / m
        pos = np.mod(phi, 2.0 * np.pi) / span
        k = np.minimum(pos.astype(int), m - 1)
        u = pos - k
        if kind == TRUNCATED:
            u1, u2, knots = trunc_data[idx]
            theta = knots[k] + (knots[k + 1] - knots[k]) * u
            full = rho * theta + (1.0 - rho) * knots[0]
            return np.cos(full)[:, None] * u1 + np.sin(full)[:, None] * u2
        e0s, axcs, totals, omega = cleaved_data[idx]
        ang = totals[k] * (1.0 - u)
        bval = np.cos(ang)[:, None] * e0s[k] + np.sin(ang)[:, None] * axcs[k]
        out = np.empty_like(bval)
        inner = rho < 0.5
        if inner.any():
            out[inner] = covering_patch(rho[inner], phi[inner], omega, xi, eta, s)
        outer = ~inner
        if outer.any():
            tau = 2.0 * rho[outer] - 1.0
            base = np.broadcast_to(minus_s, bval[outer].shape)
            out[outer] = geodesic_interpolate(base, bval[outer], tau)
        return out

    return AnalyticField(host=phat, charts=charts, evaluator=evaluator)


def random_admissible_invariants(
    phat: TruncatedPolyhedron,
    seed: int = 0,
    max_kink: int = 3,
    max_wrap: int = 3,
    s: Optional[np.ndarray] = None,
    kink_overrides: Optional[Dict[int, Tuple[int, ...]]] = None,
    wrap_override: Optional[Tuple[int, ...]] = None,
) -> InvariantSet:
    """Random invariant set satisfying both sum rules, seeded.

    Edge-orientation signs are uniform; kink numbers are drawn within
    ``max_kink`` and repaired on the last cleaved edge of each face so
    the kink rule holds, and likewise for the wrapping numbers.
    Overrides pin specific faces (keyed by face index, values in the
    face's cleaved-segment order, last entry recomputed) for corpus
    construction.
    """
    rng = np.random.default_rng(seed)
    parent = phat.parent
    signs = rng.integers(0, 2, parent.n_edges) * 2 - 1
    eps = np.array([
        float(signs[b]) * parent.edge_direction(b) for b in range(parent.n_edges)
    ])
    s_vec = normalized(s) if s is not None else choose_reference_s(phat, seed)
    probe = InvariantSet(
        s=s_vec, edge_orientations=eps, kink_numbers={},
        wrapping_numbers=np.zeros(len(phat.cleaved_faces), dtype=int),
    )

    kinks = {}
    for c, tf in enumerate(phat.trunc_faces):
        corners = [seg[1][0] for seg in tf.segments if seg[0] == "cleaved"]
        required = face_opposition_count(probe, phat, c) // 2 - 1
        override = (kink_overrides or {}).get(c)
        for _ in range(1000):
            if override is not None:
                vals = list(override[: len(corners) - 1])
            else:
                vals = list(rng.integers(-max_kink, max_kink + 1, len(corners) - 1))
            last = required - sum(vals)
            if abs(last) <= max_kink or override is not None:
                vals.append(last)
                break
        for a, k in zip(corners, vals):
            kinks[(a, c)] = int(k)

    v = len(phat.cleaved_faces)
    if wrap_override is not None:
        omegas = np.asarray(wrap_override, dtype=int)
        if omegas.sum() != 0:
            raise SumRuleViolation("wrap override does not sum to zero")
    else:
        for _ in range(1000):
            vals = rng.integers(-max_wrap, max_wrap + 1, v - 1)
            last = -int(vals.sum())
            if abs(last) <= max_wrap:
                omegas = np.concatenate([vals, [last]])
                break
        else:
            omegas = np.zeros(v, dtype=int)

    return InvariantSet(
        s=s_vec,
        edge_orientations=eps,
        kink_numbers=kinks,
        wrapping_numbers=omegas,
    )
