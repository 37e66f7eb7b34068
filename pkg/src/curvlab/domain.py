"""Riemannian polytope-type domains and pointwise hypothesis checks.

A domain is the intersection of sublevel sets ``{u_i <= 0}`` in R^n with a
metric ``g`` and the Euclidean background ``g0``. Outward normals point
along ``+grad u_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import dsl, rays
from . import riemann as rg

TAU_ACT = 1e-9
REGULAR_VALUE_FLOOR = 1e-6


class DomainError(ValueError):
    """Invalid domain description or precondition violation."""


class DegenerateError(DomainError):
    """A gradient or normal vanished where the construction divides by it."""


@dataclass(frozen=True)
class PolytopeDomain:
    n: int
    faces: tuple[dsl.Node, ...]
    metric: rg.MetricField
    seed: np.ndarray
    params: Mapping[str, float] = field(default_factory=dict)
    tau_act: float = TAU_ACT
    t_max: float = 10.0

    def __post_init__(self):
        seed = np.asarray(self.seed, dtype=float)
        object.__setattr__(self, "seed", seed)
        if seed.shape != (self.n,):
            raise DomainError(f"seed must have {self.n} coordinates")
        if not self.faces:
            raise DomainError("domain needs at least one defining function")
        if self.metric.n != self.n:
            raise DomainError("metric dimension does not match domain dimension")
        u0 = self.values(seed)
        if np.any(u0 >= 0.0):
            bad = [i for i in range(self.k) if u0[i] >= 0.0]
            raise DomainError(f"seed is not interior: u_i(seed) >= 0 for faces {bad}")

    @classmethod
    def from_strings(cls, faces: Sequence[str], n: int, seed, metric=None, params=None, **kw):
        params = dict(params or {})
        nodes = tuple(dsl.parse(f, n) for f in faces)
        if metric is None:
            metric = rg.MetricField.euclidean(n)
        elif not isinstance(metric, rg.MetricField):
            metric = rg.MetricField.from_strings(metric, n, params)
        return cls(n, nodes, metric.with_params(params) if not metric.identity else metric, seed, params, **kw)

    @property
    def k(self) -> int:
        return len(self.faces)

    def with_metric(self, metric: rg.MetricField) -> "PolytopeDomain":
        return PolytopeDomain(self.n, self.faces, metric, self.seed, self.params, self.tau_act, self.t_max)

    def subdomain(self, faces: Sequence[int]) -> "PolytopeDomain":
        return PolytopeDomain(
            self.n, tuple(self.faces[i] for i in faces), self.metric, self.seed, self.params, self.tau_act, self.t_max
        )

    def values(self, x) -> np.ndarray:
        """All ``u_i`` at ``x``; shape ``(k,)`` or ``(P, k)``."""
        x = np.asarray(x, dtype=float)
        vals = [dsl.evaluate(f, x, self.params, order=0)[0] for f in self.faces]
        return np.stack(vals, axis=-1)

    def jets(self, x, order: int = 2):
        return [dsl.evaluate(f, x, self.params, order=order) for f in self.faces]

    def metric_jet(self, x, order: int = 1) -> rg.MetricJet:
        return rg.metric_jet(self.metric, x, order=order, params=self.params)

    def lambda0(self, lam_hi: float = 1e6) -> float:
        """Smallest lambda with sum_i exp(lambda u_i(seed)) <= 1, by bisection."""
        u0 = self.values(self.seed)
        if self.k == 1:
            return 0.0
        f = lambda lam: float(np.sum(np.exp(lam * u0))) - 1.0  # noqa: E731
        lo, hi = 0.0, 1.0
        while f(hi) >= 0.0:
            hi *= 2.0
            if hi > lam_hi:
                raise DomainError("no lambda makes the seed interior")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) >= 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * hi:
                break
        return hi


# ------------------------------------------------------------ face data


@dataclass
class FaceData:
    """Per-face quantities at a batch of points (leading axis P)."""

    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray
    grad: np.ndarray  # g-gradient
    normg: np.ndarray  # |grad u|_g
    norm0: np.ndarray  # |grad u|_{g0}
    nu: np.ndarray  # g-unit normal
    N: np.ndarray  # Euclidean unit normal
    hess: np.ndarray  # covariant Hessian
    lap: np.ndarray
    dnormg: np.ndarray  # differential of |grad u|_g
    dnorm0: np.ndarray  # differential of |grad u|_{g0}
    dN: np.ndarray  # derivative of the Euclidean Gauss map, (P, n, n)


def face_data(d: PolytopeDomain, x, jet: rg.MetricJet | None = None, gamma=None) -> list[FaceData]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if jet is None:
        jet = d.metric_jet(x, order=1)
    if gamma is None:
        gamma = rg.christoffel(jet)
    out = []
    eye = np.eye(d.n)
    for u, du, ddu in d.jets(x, order=2):
        grad = rg.raise_index(du, jet)
        normg = np.sqrt(np.einsum("...i,...i->...", du, grad))
        norm0 = np.sqrt(np.einsum("...i,...i->...", du, du))
        if np.any(norm0 == 0.0) or np.any(normg == 0.0):
            raise DegenerateError("vanishing gradient of a defining function")
        hess = rg.hessian_g(du, ddu, jet, gamma)
        if jet.identity:
            lap = np.trace(hess, axis1=-2, axis2=-1)
            dq = 2.0 * np.einsum("...ij,...j->...i", ddu, du)
        else:
            lap = np.einsum("...ij,...ij->...", jet.ginv, hess)
            dq = 2.0 * np.einsum("...ij,...j->...i", ddu, grad) - np.einsum(
                "...a,...cab,...b->...c", grad, jet.dg, grad
            )
        N = du / norm0[:, None]
        dN = np.einsum("...ij,...jk->...ik", eye - N[:, :, None] * N[:, None, :], ddu) / norm0[:, None, None]
        out.append(
            FaceData(
                u=u,
                du=du,
                ddu=ddu,
                grad=grad,
                normg=normg,
                norm0=norm0,
                nu=grad / normg[:, None],
                N=N,
                hess=hess,
                lap=lap,
                dnormg=dq / (2.0 * normg[:, None]),
                dnorm0=np.einsum("...ij,...j->...i", ddu, du) / norm0[:, None],
                dN=dN,
            )
        )
    return out


def tangent_basis(covector, jet: rg.MetricJet | None = None) -> np.ndarray:
    """g-orthonormal basis of ``ker(covector)``, shape ``(P, n, n-1)``.

    Coordinate axes are projected onto the kernel after dropping the axis
    with the largest covector component, then Gram-Schmidt orthonormalized
    in ``g`` (Euclidean if ``jet`` is None or the identity).
    """
    c = np.atleast_2d(covector)
    P, n = c.shape
    if jet is not None and jet.identity:
        jet = None
    nvec = c if jet is None else rg.raise_index(c, jet)
    cn = np.einsum("...i,...i->...", c, nvec)
    drop = np.argmax(np.abs(c), axis=1)
    keep_table = np.array([[a for a in range(n) if a != b] for b in range(n)], dtype=int)
    keep = keep_table[drop]  # (P, n-1)
    basis = np.zeros((P, n, n - 1))
    rows = np.arange(P)
    for m in range(n - 1):
        v = np.zeros((P, n))
        v[rows, keep[:, m]] = 1.0
        v = v - (np.einsum("...i,...i->...", c, v) / cn)[:, None] * nvec
        for _ in range(2):  # second pass restores orthogonality lost to rounding
            for q in range(m):
                e = basis[:, :, q]
                v = v - rg.inner(v, e, jet)[:, None] * e
        v = v / rg.norm_g(v, jet)[:, None]
        basis[:, :, m] = v
    return basis


def trace_norm(M) -> np.ndarray:
    """Sum of singular values over the last two axes."""
    M = np.asarray(M, dtype=float)
    if M.shape[-1] == 0 or M.shape[-2] == 0:
        return np.zeros(M.shape[:-2])
    return np.linalg.svd(M, compute_uv=False).sum(axis=-1)


# ------------------------------------------------------------ operations


def _single(x):
    x = np.asarray(x, dtype=float)
    return x.ndim == 1, np.atleast_2d(x)


def active_set(d: PolytopeDomain, x) -> list[int]:
    u = d.values(np.asarray(x, dtype=float))
    return [i for i in range(d.k) if abs(u[i]) <= d.tau_act]


@dataclass(frozen=True)
class BoundaryClassification:
    x: np.ndarray
    active: tuple[int, ...]
    kind: str  # "regular" | "singular" | "interior"


def classify_boundary(d: PolytopeDomain, x) -> BoundaryClassification:
    a = tuple(active_set(d, x))
    kind = "interior" if not a else ("regular" if len(a) == 1 else "singular")
    return BoundaryClassification(np.asarray(x, dtype=float), a, kind)


def face_normals(d: PolytopeDomain, x, i: int):
    """(N_i, nu_i): Euclidean-unit and g-unit normals of face ``i``."""
    single, xb = _single(x)
    fd = face_data(d.subdomain([i]), xb)[0]
    if single:
        return fd.N[0], fd.nu[0]
    return fd.N, fd.nu


def _require_active(d, xb, faces):
    u = d.values(xb)
    for i in faces:
        if np.any(np.abs(u[:, i]) > d.tau_act):
            raise DomainError(f"point is not on face {i} (|u_{i}| > {d.tau_act:g})")


def check_matching_angle(d: PolytopeDomain, x, i: int, j: int):
    """g(nu_i, nu_j) - g0(N_i, N_j) at an edge point of faces i and j."""
    if i == j:
        raise DomainError("matching angle needs two distinct faces")
    single, xb = _single(x)
    _require_active(d, xb, (i, j))
    jet = d.metric_jet(xb, order=1)
    fi, fj = face_data(d.subdomain([i, j]), xb, jet)
    dev = rg.inner(fi.nu, fj.nu, jet) - np.einsum("...i,...i->...", fi.N, fj.N)
    return dev[0] if single else dev


def boundary_mean_curvature(d: PolytopeDomain, x, i: int, metric: rg.MetricField | None = None):
    """Mean curvature of ``{u_i = 0}`` at ``x`` under ``metric`` (default g)."""
    single, xb = _single(x)
    _require_active(d, xb, (i,))
    m = d.metric if metric is None else metric
    jet = rg.metric_jet(m, xb, order=1, params=d.params)
    _, du, ddu = dsl.evaluate(d.faces[i], xb, d.params, order=2)
    if np.any(np.einsum("...i,...i->...", du, du) == 0.0):
        raise DegenerateError("vanishing gradient")
    h = rg.level_set_mean_curvature(du, ddu, jet)
    return h[0] if single else h


def check_mc_metric_comparison(d: PolytopeDomain, x, i: int, direction: str = ">="):
    """Minimum eigenvalue of H_g^2 g - H_0^2 g0 on ker(du_i) (negated for '<=').

    The form is restricted with a Euclidean-orthonormal basis of the kernel,
    so eigenvalues are taken relative to g0.
    """
    if direction not in (">=", "<="):
        raise ValueError("direction must be '>=' or '<='")
    single, xb = _single(x)
    hg = np.atleast_1d(boundary_mean_curvature(d, xb, i))
    h0 = np.atleast_1d(boundary_mean_curvature(d, xb, i, rg.MetricField.euclidean(d.n)))
    jet = d.metric_jet(xb, order=1)
    _, du, _ = dsl.evaluate(d.faces[i], xb, d.params, order=1)
    B = tangent_basis(du)
    Q = hg[:, None, None] ** 2 * jet.g - h0[:, None, None] ** 2 * np.eye(d.n)
    if direction == "<=":
        Q = -Q
    Qr = np.einsum("...ia,...ij,...jb->...ab", B, Q, B)
    ev = np.linalg.eigvalsh(0.5 * (Qr + np.swapaxes(Qr, -1, -2)))[..., 0]
    return ev[0] if single else ev


def check_lemma_comparison(d: PolytopeDomain, x, i: int):
    """H_g - ||dN_i||_tr at a point of face ``i``.

    The trace norm is the one the smoothed-surface code computes for the
    single-face domain ``{u_i <= 0}``, whose smoothed boundary is the face
    itself.
    """
    from . import surface

    single, xb = _single(x)
    _require_active(d, xb, (i,))
    hg = np.atleast_1d(boundary_mean_curvature(d, xb, i))
    ev = surface.evaluate(d.subdomain([i]), 1.0, xb)
    slack = hg - ev.trN
    return slack[0] if single else slack


def check_mean_convexity(d: PolytopeDomain, x, i: int):
    return boundary_mean_curvature(d, x, i)


def check_regular_value(d: PolytopeDomain, x, i: int):
    """|grad u_i|_{g0}; 0 is a regular value if this stays above the floor."""
    single, xb = _single(x)
    _, du, _ = dsl.evaluate(d.faces[i], xb, d.params, order=1)
    nrm = np.linalg.norm(du, axis=-1)
    return nrm[0] if single else nrm


# ------------------------------------------------------- boundary samples


def boundary_raycast(d: PolytopeDomain, directions):
    """Hit points on the boundary of the domain along rays from the seed.

    Returns ``(points, t, face)`` where ``face`` is the first face crossed.
    """
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    P = dirs.shape[0]
    ts = np.full((d.k, P), np.inf)
    for i, f in enumerate(d.faces):

        def fun(t, idx, f=f):
            x = d.seed + t[:, None] * dirs[idx]
            v, g, _ = dsl.evaluate(f, x, d.params, order=1)
            return v, np.einsum("...i,...i->...", g, dirs[idx])

        t = rays.find_crossing(fun, P, d.t_max, tol=1e-14)
        ts[i] = np.where(np.isfinite(t), t, np.inf)
    face = np.argmin(ts, axis=0)
    t = ts[face, np.arange(P)]
    if np.any(~np.isfinite(t)):
        raise DomainError("a ray from the seed never reaches the boundary before t_max")
    x = d.seed + t[:, None] * dirs
    return x, t, face


def project_to_edge(d: PolytopeDomain, x, i: int, j: int, iters: int = 50):
    """Gauss-Newton (minimum-norm) projection onto {u_i = u_j = 0}."""
    x = np.array(x, dtype=float)
    for _ in range(iters):
        vi, gi, _ = dsl.evaluate(d.faces[i], x, d.params, order=1)
        vj, gj, _ = dsl.evaluate(d.faces[j], x, d.params, order=1)
        J = np.stack([gi, gj])
        r = np.array([vi, vj])
        if max(abs(vi), abs(vj)) <= 1e-14:
            break
        try:
            step = J.T @ np.linalg.solve(J @ J.T, r)
        except np.linalg.LinAlgError:
            return None
        x = x - step
    vals = d.values(x)
    if abs(vals[i]) > d.tau_act or abs(vals[j]) > d.tau_act:
        return None
    if np.any(np.delete(vals, [i, j]) > d.tau_act):
        return None
    return x


@dataclass
class BoundarySamples:
    regular_x: np.ndarray
    regular_face: np.ndarray
    singular_x: np.ndarray
    singular_pairs: np.ndarray


def sample_boundary(d: PolytopeDomain, count: int = 256) -> BoundarySamples:
    """Regular samples by raycasting; singular samples by edge projection."""
    dirs = rays.sphere_directions(count, d.n)
    x, _, face = boundary_raycast(d, dirs)
    u = d.values(x)
    reg_x, reg_f, sing_x, sing_p = [], [], [], []
    for p in range(count):
        order = np.argsort(-u[p], kind="stable")
        act = [i for i in range(d.k) if abs(u[p, i]) <= d.tau_act]
        if len(act) == 1:
            reg_x.append(x[p])
            reg_f.append(face[p])
        if d.k >= 2:
            i, j = int(order[0]), int(order[1])
            y = project_to_edge(d, x[p], i, j)
            if y is not None:
                sing_x.append(y)
                sing_p.append((min(i, j), max(i, j)))
    n = d.n
    return BoundarySamples(
        np.array(reg_x).reshape(-1, n),
        np.array(reg_f, dtype=int),
        np.array(sing_x).reshape(-1, n),
        np.array(sing_p, dtype=int).reshape(-1, 2),
    )


# ----------------------------------------------------------- hypothesis run

HYPOTHESIS_TOLERANCES = {
    "regular_value": REGULAR_VALUE_FLOOR,
    "matching_angle": 1e-10,
    "mc_comparison": 1e-10,
    "mean_convexity": 1e-10,
    "scalar_curvature": 1e-8,
    "lemma_comparison": 1e-8,
}


def _summary(values, passed_mask, worst):
    values = np.asarray(values, dtype=float)
    return {
        "count": int(values.size),
        "worst": float(worst) if values.size else None,
        "passed": bool(np.all(passed_mask)),
    }


def check_scalar_curvature(d: PolytopeDomain, x):
    single, xb = _single(x)
    R = rg.scalar_curvature(d.metric, xb, d.params)
    return R[0] if single else R


def run_hypotheses(d: PolytopeDomain, count: int = 256, tolerances: Mapping[str, float] | None = None) -> dict:
    """Every pointwise hypothesis over raycast boundary samples.

    The trace-norm slack H_g - ||dN_i||_tr is evaluated only at regular
    samples where the metric comparison (>=) passes. R_g is also sampled
    at interior points along the same rays.
    """
    tol = dict(HYPOTHESIS_TOLERANCES)
    tol.update(tolerances or {})
    bs = sample_boundary(d, count)
    out = {}
    reg_vals = [check_regular_value(d, bs.regular_x[bs.regular_face == i], i) for i in range(d.k)]
    reg_vals += [np.atleast_1d(check_regular_value(d, x, int(i))) for x, pair in zip(bs.singular_x, bs.singular_pairs) for i in pair]
    rv = np.concatenate([np.atleast_1d(v) for v in reg_vals]) if reg_vals else np.zeros(0)
    out["regular_value"] = _summary(rv, rv >= tol["regular_value"], rv.min(initial=np.inf))

    dev = np.array(
        [check_matching_angle(d, x, int(i), int(j)) for x, (i, j) in zip(bs.singular_x, bs.singular_pairs)]
    )
    out["matching_angle"] = _summary(dev, np.abs(dev) <= tol["matching_angle"], np.abs(dev).max(initial=0.0))

    mc = np.zeros(len(bs.regular_x))
    hg = np.zeros(len(bs.regular_x))
    slack = np.full(len(bs.regular_x), np.nan)
    for i in range(d.k):
        sel = bs.regular_face == i
        if not np.any(sel):
            continue
        mc[sel] = check_mc_metric_comparison(d, bs.regular_x[sel], i, ">=")
        hg[sel] = boundary_mean_curvature(d, bs.regular_x[sel], i)
        ok = sel & (mc >= -tol["mc_comparison"])
        if np.any(ok):
            slack[ok] = check_lemma_comparison(d, bs.regular_x[ok], i)
    out["mc_comparison"] = _summary(mc, mc >= -tol["mc_comparison"], mc.min(initial=np.inf))
    out["mean_convexity"] = _summary(hg, hg >= -tol["mean_convexity"], hg.min(initial=np.inf))
    used = slack[np.isfinite(slack)]
    out["lemma_comparison"] = _summary(used, used >= -tol["lemma_comparison"], used.min(initial=np.inf))

    pts = [bs.regular_x] + [d.seed + s * (bs.regular_x - d.seed) for s in (0.25, 0.5, 0.75)]
    R = np.atleast_1d(check_scalar_curvature(d, np.concatenate(pts)))
    out["scalar_curvature"] = _summary(R, R >= -tol["scalar_curvature"], R.min(initial=np.inf))
    out["regular_samples"] = int(len(bs.regular_x))
    out["singular_samples"] = int(len(bs.singular_x))
    out["passed"] = all(v["passed"] for v in out.values() if isinstance(v, dict))
    return out
