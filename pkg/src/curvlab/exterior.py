"""Rotationally symmetric exteriors ``g = phi(s)^2 ds^2 + s^2 dOmega^2`` on R^3 minus a ball.

Centered spheres flow by inverse mean curvature explicitly: with
``H = 2 / (s phi)`` and normal speed ``1/H`` the radius obeys ``s' = s/2``.
Closed forms are cross-checked against a Cartesian form of the metric run
through the generic Riemannian code (level-set mean curvature, scalar
curvature, induced area by quadrature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import dsl
from . import riemann as rg

GATE_GROWTH = 2.0
R_TOL = 1e-8


class ExteriorError(ValueError):
    pass


@dataclass(frozen=True)
class RotSymExterior:
    phi: dsl.Node  # expression in the single variable s
    s0: float
    s_max: float | None = None
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.s0 > 0.0:
            raise ExteriorError("s0 must be positive")
        if self.s_max is None:
            object.__setattr__(self, "s_max", 1e4 * self.s0)
        if not self.s_max > self.s0:
            raise ExteriorError("s_max must exceed s0")

    @classmethod
    def from_string(cls, phi: str, s0: float, s_max: float | None = None, params=None) -> "RotSymExterior":
        return cls(dsl.parse(phi, 1, var_names=("s",)), float(s0), s_max, dict(params or {}))

    def phi_jet(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        v, g, h = dsl.evaluate(self.phi, s[:, None], self.params, order=2)
        return v, g[:, 0], h[:, 0, 0]

    def phi_value(self, s):
        return self.phi_jet(s)[0]

    def cartesian_metric(self) -> rg.MetricField:
        """g_ij = delta_ij + (phi(|x|)^2 - 1) x_i x_j / |x|^2."""
        x = [dsl.Var(a) for a in range(3)]
        r2 = dsl.BinOp("+", dsl.BinOp("+", dsl.BinOp("*", x[0], x[0]), dsl.BinOp("*", x[1], x[1])), dsl.BinOp("*", x[2], x[2]))
        phi3 = dsl.substitute(self.phi, {0: dsl.Call("sqrt", r2)})
        excess = dsl.BinOp("-", dsl.BinOp("*", phi3, phi3), dsl.Num(1.0))
        rows = []
        for i in range(3):
            row = []
            for j in range(i, 3):
                off = dsl.BinOp("/", dsl.BinOp("*", excess, dsl.BinOp("*", x[i], x[j])), r2)
                row.append(dsl.BinOp("+", dsl.Num(1.0), off) if i == j else off)
            rows.append(tuple(row))
        return rg.MetricField(3, tuple(rows), dict(self.params))


def sphere_mean_curvature(ext: RotSymExterior, s):
    s = np.asarray(s, dtype=float)
    return 2.0 / (s * ext.phi_value(s).reshape(s.shape))


def imcf_radius(ext: RotSymExterior, t):
    return ext.s0 * np.exp(np.asarray(t, dtype=float) / 2.0)


def imcf_radius_ode(ext: RotSymExterior, t: float, steps: int = 2000) -> float:
    """RK4 for ds/dt = 1 / (H phi), the radial speed of the flow."""

    def rate(s):
        return float(1.0 / (sphere_mean_curvature(ext, np.array([s]))[0] * ext.phi_value(s)[0]))

    s, h = ext.s0, t / steps
    for _ in range(steps):
        k1 = rate(s)
        k2 = rate(s + 0.5 * h * k1)
        k3 = rate(s + 0.5 * h * k2)
        k4 = rate(s + h * k3)
        s += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return s


def hawking_mass(ext: RotSymExterior, s):
    s = np.asarray(s, dtype=float)
    phi = ext.phi_value(s).reshape(s.shape)
    return 0.5 * s * (1.0 - 1.0 / (phi * phi))


def scalar_curvature_closed(ext: RotSymExterior, s):
    """R = 4 m'(s) / s^2 with m the Hawking mass profile."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    v, d1, _ = ext.phi_jet(s)
    dm = 0.5 * (1.0 - v**-2) + s * d1 / v**3
    return 4.0 * dm / (s * s)


# --------------------------------------------------------------- quadrature


def _sphere_nodes(order: int):
    """Gauss-Legendre in cos(theta) times a uniform azimuth grid."""
    z, wz = np.polynomial.legendre.leggauss(order)
    az = 2.0 * math.pi * (np.arange(2 * order) + 0.5) / (2 * order)
    Z, A = np.meshgrid(z, az, indexing="ij")
    W = np.repeat(wz[:, None], 2 * order, axis=1) * (2.0 * math.pi / (2 * order))
    rho = np.sqrt(1.0 - Z**2)
    dirs = np.stack([rho * np.cos(A), rho * np.sin(A), Z], axis=-1).reshape(-1, 3)
    # tangent vectors d/dz and d/dazimuth of the unit sphere, with dz = sin(theta) dtheta
    t_z = np.stack([-Z / rho * np.cos(A), -Z / rho * np.sin(A), np.ones_like(Z)], axis=-1).reshape(-1, 3)
    t_a = np.stack([-rho * np.sin(A), rho * np.cos(A), np.zeros_like(Z)], axis=-1).reshape(-1, 3)
    return dirs, t_z, t_a, W.reshape(-1)


@dataclass
class SphereQuadrature:
    area: float
    h2_integral: float
    H: np.ndarray


def sphere_quadrature(ext: RotSymExterior, s: float, order: int = 8, euclidean: bool = False) -> SphereQuadrature:
    """Area and integral of H^2 over the centered sphere of radius ``s``.

    Uses the Cartesian metric (or the Euclidean one), the induced-area
    Gram determinant and level-set mean curvature of ``|x|^2``.
    """
    dirs, t_z, t_a, W = _sphere_nodes(order)
    x = s * dirs
    field_ = rg.MetricField.euclidean(3) if euclidean else ext.cartesian_metric()
    jet = rg.metric_jet(field_, x, order=1)
    T = np.stack([s * t_z, s * t_a], axis=-1)  # (P, 3, 2)
    if jet.identity:
        gram = np.einsum("pia,pib->pab", T, T)
    else:
        gram = np.einsum("pia,pij,pjb->pab", T, jet.g, T)
    dA = np.sqrt(np.linalg.det(gram)) * W
    du = 2.0 * x
    ddu = np.broadcast_to(2.0 * np.eye(3), (x.shape[0], 3, 3))
    H = rg.level_set_mean_curvature(du, ddu, jet)
    return SphereQuadrature(float(np.sum(dA)), float(np.sum(H * H * dA)), H)


def hawking_mass_quadrature(ext: RotSymExterior, s: float, order: int = 8) -> float:
    """sqrt(|S| / (16 pi)^3) (16 pi - int H^2), by quadrature."""
    q = sphere_quadrature(ext, s, order)
    return math.sqrt(q.area / (16.0 * math.pi) ** 3) * (16.0 * math.pi - q.h2_integral)


def scalar_curvature_samples(ext: RotSymExterior, s_grid, directions: int = 6) -> np.ndarray:
    """R from the Cartesian metric along a few fixed directions, shape ``(len(s_grid), directions)``."""
    s_grid = np.asarray(s_grid, dtype=float)
    dirs = _fixed_directions(directions)
    x = (s_grid[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    R = rg.scalar_curvature(ext.cartesian_metric(), x)
    return R.reshape(len(s_grid), len(dirs))


def _fixed_directions(count):
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    a = math.pi * (1.0 + math.sqrt(5.0)) * i
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(a), r * np.sin(a), z], axis=1)


# --------------------------------------------------------- asymptotics


def log_grid(ext: RotSymExterior, count: int = 64) -> np.ndarray:
    return np.geomspace(ext.s0, ext.s_max, count)


def asymptotic_gate(ext: RotSymExterior, count: int = 64) -> dict:
    """phi > 0 on a log grid, and |phi - 1| s stays bounded over the last decade."""
    s = log_grid(ext, count)
    phi = ext.phi_value(s)
    positive = bool(np.all(phi > 0.0))
    tail = np.geomspace(ext.s_max / 10.0, ext.s_max, 16)
    decay = np.abs(ext.phi_value(tail) - 1.0) * tail
    bounded = bool(np.all(np.isfinite(decay)) and decay.max() <= GATE_GROWTH * decay[0] + 1e-12)
    return {"phi_positive": positive, "decay_bounded": bounded, "tail_decay": float(decay[-1]), "passed": positive and bounded}


@dataclass
class AdmEstimate:
    value: float
    error: float


def adm_mass(ext: RotSymExterior) -> AdmEstimate:
    """Richardson extrapolation of m_H(s) = m + a/s + b/s^2 at s_max/4, s_max/2, s_max."""
    gate = asymptotic_gate(ext)
    if not gate["passed"]:
        raise ExteriorError(f"asymptotic flatness gate failed: {gate}")
    s = ext.s_max * np.array([0.25, 0.5, 1.0])
    m = hawking_mass(ext, s)
    A = np.stack([np.ones(3), 1.0 / s, 1.0 / s**2], axis=1)
    three = float(np.linalg.solve(A, m)[0])
    two = float(2.0 * m[2] - m[1])  # drops the 1/s term only
    return AdmEstimate(three, abs(three - two))


# ------------------------------------------------------------ flow trace


def flow_trace(ext: RotSymExterior, count: int = 64, order: int = 8) -> list[dict]:
    """Rows (t, s, area, H, m_H) with t spaced so s covers [s0, s_max]."""
    t_end = 2.0 * math.log(ext.s_max / ext.s0)
    rows = []
    for t in np.linspace(0.0, t_end, count):
        s = float(imcf_radius(ext, t))
        q = sphere_quadrature(ext, s, order)
        rows.append(
            {
                "t": float(t),
                "s": s,
                "area": q.area,
                "H": float(sphere_mean_curvature(ext, np.array([s]))[0]),
                "m_H": float(hawking_mass(ext, np.array([s]))[0]),
            }
        )
    return rows


# --------------------------------------------------------- inequality chain


def _row(name, passed, margin, kind="conclusion", note=""):
    return {"check": name, "kind": kind, "passed": passed, "margin": margin, "note": note}


def prop42_pipeline(ext: RotSymExterior, grid: int = 64, order: int = 8) -> dict:
    """Boundary comparison, monotonicity and mass chain for one exterior.

    Rows of kind ``hypothesis`` are inputs of the chain; when one fails,
    the rows depending on it are reported as not applicable instead of as
    failures of the conclusion.
    """
    s0 = ext.s0
    H = float(sphere_mean_curvature(ext, np.array([s0]))[0])
    H0 = 2.0 / s0
    rows = []
    gate = asymptotic_gate(ext, grid)
    rows.append(_row("asymptotic_flatness", gate["passed"], gate["tail_decay"], "hypothesis"))
    rows.append(_row("boundary_mean_convex", H > 0.0, H, "hypothesis"))
    rows.append(_row("boundary_comparison", H <= H0 * (1.0 + 1e-14), H0 - H, "hypothesis"))
    q = sphere_quadrature(ext, s0, order)
    q0 = sphere_quadrature(ext, s0, order, euclidean=True)
    pivot = 16.0 * math.pi
    rows.append(_row("boundary_h2_integral", q.h2_integral <= pivot * (1.0 + 1e-12), pivot - q.h2_integral))
    rows.append(_row("euclidean_pivot_16pi", abs(q0.h2_integral - pivot) <= 1e-8, q0.h2_integral - pivot, "identity"))
    s = log_grid(ext, grid)
    R = scalar_curvature_samples(ext, s)
    R_ok = bool(R.min() >= -R_TOL)
    rows.append(_row("scalar_curvature_nonnegative", R_ok, float(R.min()), "hypothesis"))
    mH = hawking_mass(ext, s)
    steps = np.diff(mH)
    # (s/2)(1 - phi^-2) loses about s * eps to cancellation
    tol = 16.0 * np.finfo(float).eps * ext.s_max * max(1.0, float(np.abs(mH).max()))
    mono = bool(np.all(steps >= -tol))
    if R_ok:
        rows.append(_row("hawking_mass_monotone", mono, float(steps.min(initial=0.0))))
    else:
        rows.append(
            _row(
                "hawking_mass_monotone",
                None,
                float(steps.min(initial=0.0)),
                note="not applicable: scalar_curvature_nonnegative failed",
            )
        )
    adm = None
    if gate["passed"]:
        est = adm_mass(ext)
        adm = est.value
        m0 = float(hawking_mass(ext, np.array([s0]))[0])
        ok = m0 <= adm + max(10.0 * est.error, 1e-10)
        if R_ok:
            rows.append(_row("mass_chain", ok, adm - m0))
        else:
            rows.append(_row("mass_chain", None, adm - m0, note="not applicable: scalar_curvature_nonnegative failed"))
    hyp_failed = [r["check"] for r in rows if r["kind"] == "hypothesis" and r["passed"] is False]
    concl_failed = [r["check"] for r in rows if r["kind"] != "hypothesis" and r["passed"] is False]
    return {
        "s0": s0,
        "H_boundary": H,
        "H0_boundary": H0,
        "m_adm": adm,
        "checks": rows,
        "violated_hypotheses": hyp_failed,
        "failed_conclusions": concl_failed,
        "passed": not hyp_failed and not concl_failed,
    }
