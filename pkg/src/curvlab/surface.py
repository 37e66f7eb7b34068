"""The smoothed boundary ``{sum_i exp(lam u_i) = 1}`` and quantities on it.

Points are produced by casting rays from the domain seed. At each point the
module evaluates the g-unit normal ``nu``, the normal map ``N`` into the unit
sphere, the mean curvature ``H`` (two independent ways), the differential
``dN`` as a matrix between orthonormal tangent bases, its trace norm, and
the five-term lower bound ``V`` for ``H - ||dN||_tr``.

Conventions:

* ``|.|`` without subscript is the g-norm; ``pi`` is g-orthogonal projection
  onto the tangent space of the surface and ``P`` is the Euclidean projection
  orthogonal to ``N`` (the tangent space of the sphere at ``N``).
* Face weights in ``nu`` and ``N`` are ``|grad u_i|_g``; ``weights="euclidean"``
  swaps in ``|grad u_i|_{g0}`` for sensitivity runs.
* ``||dN_i||_tr`` is the trace norm of ``zeta -> P dN_i(zeta)`` on the tangent
  space of the smoothed surface, which is what the triangle-inequality bound
  on ``||dN||_tr`` consumes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import dsl, rays
from . import riemann as rg
from .domain import DegenerateError, DomainError, PolytopeDomain, face_data, tangent_basis, trace_norm

NORMAL_FLOOR = 1e-12
SURFACE_RESIDUAL = 1e-10
CHUNK = 4096


class LambdaError(DomainError):
    """lambda is too small for the seed to lie inside the smoothed domain."""


def smoothing_function(d: PolytopeDomain, lam: float) -> dsl.Node:
    """Expression tree of ``sum_i exp(lam * u_i)``."""
    terms = [dsl.Call("exp", dsl.BinOp("*", dsl.Num(float(lam)), f)) for f in d.faces]
    node = terms[0]
    for t in terms[1:]:
        node = dsl.BinOp("+", node, t)
    return node


def _logsumexp(a):
    m = np.max(a, axis=-1, keepdims=True)
    return (m + np.log(np.sum(np.exp(a - m), axis=-1, keepdims=True)))[..., 0]


def seed_value(d: PolytopeDomain, lam: float) -> float:
    return float(np.sum(np.exp(lam * d.values(d.seed))))


def raycast(d: PolytopeDomain, lam: float, directions, t_max: float | None = None):
    """Points of the smoothed surface along unit ``directions`` from the seed.

    Returns ``(x, t)``. Bracketing plus safeguarded Newton on
    ``log sum exp(lam u_i)``, which is convex along rays for convex faces.
    """
    fs = seed_value(d, lam)
    if not fs < 1.0:
        raise LambdaError(
            f"lambda={lam:g} is below lambda0={d.lambda0():.6g}: smoothing function at seed is {fs:.6g} >= 1"
        )
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    P = dirs.shape[0]
    t_max = d.t_max if t_max is None else t_max

    def fun(t, idx):
        x = d.seed + t[:, None] * dirs[idx]
        jets = d.jets(x, order=1)
        a = np.stack([lam * v for v, _, _ in jets], axis=-1)
        phi = _logsumexp(a)
        soft = np.exp(a - phi[:, None])
        slope = np.stack([lam * np.einsum("...i,...i->...", g, dirs[idx]) for _, g, _ in jets], axis=-1)
        return phi, np.sum(soft * slope, axis=-1)

    t = rays.find_crossing(fun, P, t_max, tol=1e-13)
    if np.any(~np.isfinite(t)):
        raise DomainError(f"{int(np.sum(~np.isfinite(t)))} rays found no crossing before t_max={t_max:g}")
    return d.seed + t[:, None] * dirs, t


@dataclass
class SurfaceEval:
    """Batched surface quantities; every array has leading axis P."""

    x: np.ndarray
    lam: float
    u: np.ndarray  # (P, k)
    residual: np.ndarray  # F - 1
    nu: np.ndarray
    N: np.ndarray
    nu0: np.ndarray  # Euclidean unit normal
    E: np.ndarray  # g-orthonormal tangent basis (P, n, n-1)
    F: np.ndarray  # Euclidean orthonormal basis of N-perp (P, n, n-1)
    G_norm: np.ndarray  # |sum w_i du_i|_g
    S_norm: np.ndarray  # |sum w_i |du_i| N_i|_{g0}
    c0_norm: np.ndarray  # |sum w_i du_i|_{g0}
    H: np.ndarray
    H_levelset: np.ndarray | None
    M: np.ndarray  # dN in the (E, F) bases, (P, n-1, n-1)
    trN: np.ndarray
    terms: np.ndarray  # (P, 5) the five signed pieces of V
    V: np.ndarray
    area_ratio: np.ndarray  # g-area / Euclidean area element


def _g_pair(v, E, jet):
    """g(v, E_m) for each basis column m."""
    if jet.identity:
        return np.einsum("pj,pjm->pm", v, E)
    return np.einsum("pj,pjk,pkm->pm", v, jet.g, E)


def _face_terms(d, lam, X, weights, jet, gamma):
    fds = face_data(d, X, jet, gamma)
    U = np.stack([f.u for f in fds], axis=-1)
    w = np.exp(lam * U)
    return fds, U, w


def evaluate(
    d: PolytopeDomain,
    lam: float,
    X,
    weights: str = "g",
    levelset: bool = True,
    floor: float = NORMAL_FLOOR,
) -> SurfaceEval:
    """Evaluate every surface quantity at points ``X`` of the smoothed surface."""
    if weights not in ("g", "euclidean"):
        raise ValueError("weights must be 'g' or 'euclidean'")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P, n = X.shape
    jet = d.metric_jet(X, order=1)
    gamma = rg.christoffel(jet)
    fds, U, w = _face_terms(d, lam, X, weights, jet, gamma)

    c = sum(w[:, i, None] * f.du for i, f in enumerate(fds))
    G = rg.raise_index(c, jet)
    G_norm = np.sqrt(np.einsum("...i,...i->...", c, G))
    c0_norm = np.sqrt(np.einsum("...i,...i->...", c, c))
    euclid_w = weights == "euclidean"
    om = [f.norm0 if euclid_w else f.normg for f in fds]
    dom = [f.dnorm0 if euclid_w else f.dnormg for f in fds]
    if euclid_w or jet.identity:
        # |du|_{g0} N_i == du_i, so the weighted sum is c itself
        S = c
    else:
        S = sum((w[:, i] * om[i])[:, None] * f.N for i, f in enumerate(fds))
    S_norm = np.sqrt(np.einsum("...i,...i->...", S, S))
    if np.any(G_norm < floor) or np.any(S_norm < floor):
        raise DegenerateError(
            f"normal denominators below floor {floor:g}: min |G|={G_norm.min():.3e}, min |S|={S_norm.min():.3e}"
        )
    nu = G / G_norm[:, None]
    N = S / S_norm[:, None]
    nu0 = c / c0_norm[:, None]
    E = tangent_basis(c, jet)
    Fb = tangent_basis(S, None)

    t1 = np.zeros(P)
    t2 = np.zeros(P)
    t3 = np.zeros(P)
    t4 = np.zeros(P)
    t5 = np.zeros(P)
    dS = np.zeros((P, n, n - 1))
    for i, f in enumerate(fds):
        wi = w[:, i]
        gE = np.einsum("pj,pjm->pm", f.du, E)  # du_i(E_m) = g(grad u_i, E_m)
        a = np.sqrt(np.sum(_g_pair(f.nu, E, jet) ** 2, axis=1))
        b = np.sqrt(np.sum(np.einsum("pj,pjm->pm", f.N, Fb) ** 2, axis=1))
        hnn = np.einsum("pi,pij,pj->p", nu, f.hess, nu)
        dP = np.einsum("pja,pjk,pkm->pam", Fb, f.dN, E)
        t1 = t1 + wi * f.normg * f.normg * a * a
        t2 = t2 + wi * (f.lap - hnn)
        t3 = t3 + wi * om[i] * f.normg * a * b
        t4 = t4 + wi * rg.conorm(dom[i], jet) * b
        t5 = t5 + wi * om[i] * trace_norm(dP)
        coef = lam * (wi * om[i])[:, None] * gE + wi[:, None] * np.einsum("pj,pjm->pm", dom[i], E)
        dS = dS + f.N[:, :, None] * coef[:, None, :] + (wi * om[i])[:, None, None] * np.einsum(
            "pjk,pkm->pjm", f.dN, E
        )
    t1 = lam * t1 / G_norm
    t2 = t2 / G_norm
    t3 = lam * t3 / S_norm
    t4 = t4 / S_norm
    t5 = t5 / S_norm
    H = t1 + t2
    V = t1 + t2 - t3 - t4 - t5
    M = np.einsum("pja,pjm->pam", Fb, dS) / S_norm[:, None, None]
    trN = trace_norm(M)

    H_ls = None
    Fval = np.sum(w, axis=1)
    if levelset:
        Fn = smoothing_function(d, lam)
        Fv, dF, ddF = dsl.evaluate(Fn, X, d.params, order=2)
        H_ls = rg.level_set_mean_curvature(dF, ddF, jet, gamma)
        Fval = Fv
    gram0 = np.einsum("pjm,pjl->pml", E, E)
    area_ratio = 1.0 / np.sqrt(np.linalg.det(gram0))
    return SurfaceEval(
        x=X,
        lam=float(lam),
        u=U,
        residual=Fval - 1.0,
        nu=nu,
        N=N,
        nu0=nu0,
        E=E,
        F=Fb,
        G_norm=G_norm,
        S_norm=S_norm,
        c0_norm=c0_norm,
        H=H,
        H_levelset=H_ls,
        M=M,
        trN=trN,
        terms=np.stack([t1, t2, -t3, -t4, -t5], axis=1),
        V=V,
        area_ratio=area_ratio,
    )


def normals(d: PolytopeDomain, lam: float, X, weights: str = "g"):
    """(nu, N) at points of the smoothed surface."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    jet = d.metric_jet(X, order=1)
    jets = d.jets(X, order=1)
    w = np.exp(lam * np.stack([v for v, _, _ in jets], axis=-1))
    c = sum(w[:, i, None] * du for i, (_, du, _) in enumerate(jets))
    G = rg.raise_index(c, jet)
    G_norm = np.sqrt(np.einsum("...i,...i->...", c, G))
    if weights == "euclidean" or jet.identity:
        S = c
    else:
        S = sum(
            (w[:, i] * rg.conorm(du, jet))[:, None] * du / np.linalg.norm(du, axis=1)[:, None]
            for i, (_, du, _) in enumerate(jets)
        )
    S_norm = np.sqrt(np.einsum("...i,...i->...", S, S))
    if np.any(G_norm < NORMAL_FLOOR) or np.any(S_norm < NORMAL_FLOOR):
        raise DegenerateError("normal denominators below floor")
    return G / G_norm[:, None], S / S_norm[:, None]


def mean_curvature(d: PolytopeDomain, lam: float, X) -> np.ndarray:
    return evaluate(d, lam, X, levelset=False).H


def dN_matrix(d: PolytopeDomain, lam: float, X) -> np.ndarray:
    return evaluate(d, lam, X, levelset=False).M


def v_lambda(d: PolytopeDomain, lam: float, X):
    """``(V, H - trN)`` so the pointwise inequality can be asserted."""
    ev = evaluate(d, lam, X, levelset=False)
    return ev.V, ev.H - ev.trN


def dN_finite_difference(d: PolytopeDomain, lam: float, ev: SurfaceEval, h: float | None = None, weights="g"):
    """dN in the bases of ``ev`` by differentiating N along surface curves.

    Each curve is the radial projection (raycast from the seed) of the
    straight line ``x + s E_m``; its velocity at ``s = 0`` is ``E_m``. A
    fourth-order central stencil is used.
    """
    X, E, Fb = ev.x, ev.E, ev.F
    P, n = X.shape
    if h is None:
        h = 1e-3 / max(1.0, ev.lam)
    offsets = (-2.0, -1.0, 1.0, 2.0)
    coeffs = (1.0, -8.0, 8.0, -1.0)
    pts = []
    for m in range(n - 1):
        for s in offsets:
            pts.append(X + s * h * E[:, :, m])
    Y = np.concatenate(pts, axis=0)
    dirs = Y - d.seed
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    Z, _ = raycast(d, lam, dirs)
    _, NZ = normals(d, lam, Z, weights)
    NZ = NZ.reshape(n - 1, len(offsets), P, n)
    M = np.zeros((P, n - 1, n - 1))
    for m in range(n - 1):
        deriv = sum(c * NZ[m, k] for k, c in enumerate(coeffs)) / (12.0 * h)
        M[:, :, m] = np.einsum("pja,pj->pa", Fb, deriv)
    return M


# ------------------------------------------------------------- sampling


@dataclass
class SampleSet:
    """Struct-of-arrays table of surface samples at one lambda."""

    lam: float
    omega: np.ndarray
    t: np.ndarray
    x: np.ndarray
    nu: np.ndarray
    N: np.ndarray
    H: np.ndarray
    H_levelset: np.ndarray
    trN: np.ndarray
    V: np.ndarray
    terms: np.ndarray
    w: np.ndarray  # g-area quadrature weight
    u: np.ndarray  # (P, k)
    residual: np.ndarray
    G_norm: np.ndarray
    S_norm: np.ndarray
    c0_norm: np.ndarray

    def __len__(self):
        return self.x.shape[0]

    def sample(self, p: int) -> "SurfaceSample":
        order, vals = sorted_faces(self.u[p : p + 1])
        return SurfaceSample(
            x=self.x[p],
            lam=self.lam,
            omega=self.omega[p],
            nu=self.nu[p],
            N=self.N[p],
            H=float(self.H[p]),
            trN=float(self.trN[p]),
            V=float(self.V[p]),
            w=float(self.w[p]),
            u_sorted=tuple(float(v) for v in vals[0, :3]),
            idx_sorted=tuple(int(i) for i in order[0, :3]),
        )

    def subset(self, mask) -> "SampleSet":
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v if f.name == "lam" else v[mask]
        return SampleSet(**out)


@dataclass(frozen=True)
class SurfaceSample:
    x: np.ndarray
    lam: float
    omega: np.ndarray
    nu: np.ndarray
    N: np.ndarray
    H: float
    trN: float
    V: float
    w: float
    u_sorted: tuple
    idx_sorted: tuple


def _sample_chunk(d, lam, dirs, weights, cell, residual_tol):
    X, t = raycast(d, lam, dirs)
    ev = evaluate(d, lam, X, weights=weights)
    if np.any(np.abs(ev.residual) > residual_tol):
        raise DomainError(f"surface residual {np.abs(ev.residual).max():.3e} exceeds {residual_tol:g}")
    n = X.shape[1]
    cos = np.einsum("pi,pi->p", dirs, ev.nu0)
    w = t ** (n - 1) / cos * ev.area_ratio * cell
    return SampleSet(
        lam=float(lam),
        omega=dirs,
        t=t,
        x=X,
        nu=ev.nu,
        N=ev.N,
        H=ev.H,
        H_levelset=ev.H_levelset,
        trN=ev.trN,
        V=ev.V,
        terms=ev.terms,
        w=w,
        u=ev.u,
        residual=ev.residual,
        G_norm=ev.G_norm,
        S_norm=ev.S_norm,
        c0_norm=ev.c0_norm,
    )


def concat(parts: list[SampleSet]) -> SampleSet:
    out = {}
    for f in fields(SampleSet):
        if f.name == "lam":
            out["lam"] = parts[0].lam
        else:
            out[f.name] = np.concatenate([getattr(p, f.name) for p in parts], axis=0)
    return SampleSet(**out)


def sample_surface(
    d: PolytopeDomain,
    lam: float,
    count: int,
    weights: str = "g",
    workers: int = 1,
    chunk: int = CHUNK,
    residual_tol: float = SURFACE_RESIDUAL,
) -> SampleSet:
    """Sample the smoothed surface along ``count`` low-discrepancy rays.

    Chunks are fixed-size and reassembled in ray order, so results do not
    depend on ``workers``.
    """
    dirs = rays.sphere_directions(count, d.n)
    cell = rays.sphere_area(d.n) / count
    pieces = [dirs[s : s + chunk] for s in range(0, count, chunk)]
    job = lambda part: _sample_chunk(d, lam, part, weights, cell, residual_tol)  # noqa: E731
    if workers > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, pieces))
    else:
        parts = [job(p) for p in pieces]
    return concat(parts)


def c_constants(samples: SampleSet):
    """Infima of |sum w_i du_i|_g and |sum w_i |du_i| N_i|_{g0}, plus the g0 value of the first."""
    if len(samples) == 0:
        raise ValueError("empty sample set")
    return float(samples.G_norm.min()), float(samples.S_norm.min()), float(samples.c0_norm.min())


# -------------------------------------------------------------- regions

FACE, EDGE, VERTEX = 0, 1, 2
KIND_NAMES = ("face", "edge", "vertex")


@dataclass(frozen=True)
class RegionTag:
    kind: str
    indices: tuple
    r: float


def sorted_faces(u):
    """Face indices by decreasing value, ties by ascending index."""
    u = np.atleast_2d(u)
    order = np.argsort(-u, axis=1, kind="stable")
    return order, np.take_along_axis(u, order, axis=1)


def face_threshold(lam, r):
    return lam ** (-7.0 / 8.0) * r ** (1.0 / 8.0)


def vertex_threshold(lam, r):
    return lam ** (-3.0 / 4.0) * r ** (1.0 / 4.0)


def region_kinds(u, lam: float, r) -> np.ndarray:
    """Region kind codes for sample values ``u`` (P, k) at radius/radii ``r``.

    Face when the second-largest value is at most ``-lam^{-7/8} r^{1/8}``;
    otherwise vertex when the third-largest is at least
    ``-lam^{-3/4} r^{1/4}``; otherwise edge. Returns ``(P,)`` for scalar
    ``r`` or ``(P, R)`` for an array of radii.
    """
    _, vals = sorted_faces(u)
    P, k = vals.shape
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    u2 = vals[:, 1:2] if k >= 2 else np.full((P, 1), -np.inf)
    u3 = vals[:, 2:3] if k >= 3 else np.full((P, 1), -np.inf)
    face = u2 <= -face_threshold(lam, r_arr)[None, :]
    vert = u3 >= -vertex_threshold(lam, r_arr)[None, :]
    kinds = np.where(face, FACE, np.where(vert, VERTEX, EDGE))
    return kinds[:, 0] if np.ndim(r) == 0 else kinds


def classify_region(sample: SurfaceSample, r: float) -> RegionTag:
    u = np.full(max(3, len(sample.u_sorted)), -np.inf)
    u[: len(sample.u_sorted)] = sample.u_sorted
    kind = int(region_kinds(u[None, :], sample.lam, r)[0])
    return RegionTag(KIND_NAMES[kind], sample.idx_sorted, float(r))
