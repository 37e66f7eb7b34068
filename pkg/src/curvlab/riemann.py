"""Metric fields and pointwise Riemannian geometry on coordinate patches.

Index conventions for batched arrays (leading axis ``P`` = points):

* ``dg[p, k, i, j]      = d_k g_ij``
* ``d2g[p, k, l, i, j]  = d_k d_l g_ij``
* ``gamma[p, k, i, j]   = Gamma^k_ij``
* ``riemann[p, a, b, c, d] = R_abcd`` with ``R^a_bcd = d_c G^a_db - d_d G^a_cb + ...``

A metric flagged ``identity`` short-circuits to exact Euclidean arithmetic;
``ginv`` is then ``None`` and all metric contractions reduce to plain dot
products, bit-for-bit the same as the Euclidean routines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import dsl

SPD_FLOOR = 1e-10


class MetricError(ValueError):
    """Metric matrix is not symmetric positive definite at a point."""


@dataclass(frozen=True)
class MetricField:
    """Symmetric tensor field given entrywise as expressions.

    ``entries[i][j]`` for ``j >= i`` holds the expression of ``g_ij``; the
    lower triangle is implied.
    """

    n: int
    entries: tuple[tuple[dsl.Node, ...], ...] | None = None
    params: Mapping[str, float] | None = None

    @property
    def identity(self) -> bool:
        return self.entries is None

    @classmethod
    def euclidean(cls, n: int) -> "MetricField":
        return cls(n)

    @classmethod
    def from_strings(cls, rows: Sequence[Sequence[str]], n: int, params=None) -> "MetricField":
        """Build from an upper-triangular (or full) table of expression strings."""
        if len(rows) != n:
            raise ValueError(f"metric needs {n} rows, got {len(rows)}")
        entries = []
        for i, row in enumerate(rows):
            row = list(row)
            if len(row) == n:
                row = row[i:]
            if len(row) != n - i:
                raise ValueError(f"metric row {i} needs {n - i} upper-triangular entries")
            entries.append(tuple(dsl.parse(str(t), n) for t in row))
        return cls(n, tuple(entries), dict(params or {}))

    @classmethod
    def from_nodes(cls, nodes, n: int, params=None) -> "MetricField":
        """``nodes[i][j]`` for ``j >= i`` (full square tables are accepted)."""
        entries = []
        for i in range(n):
            row = list(nodes[i])
            if len(row) == n:
                row = row[i:]
            entries.append(tuple(row))
        return cls(n, tuple(entries), dict(params or {}))

    @classmethod
    def conformal(cls, factor: dsl.Node, n: int, params=None) -> "MetricField":
        """``g = factor * delta``."""
        zero = dsl.Num(0.0)
        return cls(n, tuple(tuple(factor if j == i else zero for j in range(i, n)) for i in range(n)), dict(params or {}))

    def with_params(self, params: Mapping[str, float]) -> "MetricField":
        merged = dict(self.params or {})
        merged.update(params)
        return MetricField(self.n, self.entries, merged)


@dataclass
class MetricJet:
    g: np.ndarray
    ginv: np.ndarray | None
    dg: np.ndarray
    d2g: np.ndarray | None
    identity: bool = False


def metric_jet(field: MetricField, x, order: int = 2, params=None) -> MetricJet:
    """Metric, inverse and coordinate partials at ``x`` (``(n,)`` or ``(P, n)``)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    P, n = xb.shape
    if n != field.n:
        raise ValueError(f"point dimension {n} does not match metric dimension {field.n}")
    if field.identity:
        g = np.broadcast_to(np.eye(n), (P, n, n)).copy()
        jet = MetricJet(
            g=g,
            ginv=None,
            dg=np.zeros((P, n, n, n)),
            d2g=np.zeros((P, n, n, n, n)) if order >= 2 else None,
            identity=True,
        )
    else:
        allp = dict(field.params or {})
        allp.update(params or {})
        g = np.empty((P, n, n))
        dg = np.empty((P, n, n, n))
        d2g = np.empty((P, n, n, n, n)) if order >= 2 else None
        for i in range(n):
            for jj, node in enumerate(field.entries[i]):
                j = i + jj
                v, gr, h = dsl.evaluate(node, xb, allp, order=max(order, 1))
                g[:, i, j] = g[:, j, i] = v
                dg[:, :, i, j] = dg[:, :, j, i] = gr
                if d2g is not None:
                    d2g[:, :, :, i, j] = d2g[:, :, :, j, i] = h
        _check_spd(g, xb)
        jet = MetricJet(g=g, ginv=np.linalg.inv(g), dg=dg, d2g=d2g)
    if single:
        return MetricJet(
            g=jet.g[0],
            ginv=None if jet.ginv is None else jet.ginv[0],
            dg=jet.dg[0],
            d2g=None if jet.d2g is None else jet.d2g[0],
            identity=jet.identity,
        )
    return jet


def _check_spd(g, x):
    if not np.all(np.isfinite(g)):
        raise MetricError("metric is not finite")
    eig = np.linalg.eigvalsh(g)
    tr = np.trace(g, axis1=-2, axis2=-1)
    bad = eig[:, 0] <= SPD_FLOOR * np.abs(tr)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise MetricError(
            f"metric not positive definite at x={x[k].tolist()} (min eigenvalue {eig[k, 0]:.3e})"
        )


# --------------------------------------------------------------- algebra


def inner(a, b, jet: MetricJet | None = None):
    """g(a, b) for vectors (last axis)."""
    if jet is None or jet.identity:
        return np.einsum("...i,...i->...", a, b)
    return np.einsum("...i,...ij,...j->...", a, jet.g, b)


def norm_g(v, jet: MetricJet | None = None):
    return np.sqrt(inner(v, v, jet))


def raise_index(covector, jet: MetricJet):
    """g^{-1} applied to a covector (the g-gradient of ``du``)."""
    if jet.identity:
        return covector
    return np.einsum("...ij,...j->...i", jet.ginv, covector)


def conorm(covector, jet: MetricJet):
    """Dual norm of a covector, equal to the g-norm of its raised vector."""
    return np.sqrt(np.einsum("...i,...i->...", covector, raise_index(covector, jet)))


def grad_g(du, jet: MetricJet):
    return raise_index(du, jet)


def christoffel(jet: MetricJet) -> np.ndarray:
    """Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)."""
    if jet.identity:
        return np.zeros(jet.dg.shape)
    dg = jet.dg
    # t[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    d_i_gjl = np.einsum("...ijl->...lij", dg)
    d_j_gil = np.einsum("...jil->...lij", dg)
    t = d_i_gjl + d_j_gil - dg
    gam = 0.5 * np.einsum("...kl,...lij->...kij", jet.ginv, t)
    return 0.5 * (gam + np.swapaxes(gam, -1, -2))


def hessian_g(du, ddu, jet: MetricJet, gamma=None):
    """Covariant Hessian d_i d_j u - Gamma^k_ij d_k u (symmetric)."""
    if jet.identity:
        return ddu
    if gamma is None:
        gamma = christoffel(jet)
    h = ddu - np.einsum("...kij,...k->...ij", gamma, du)
    return 0.5 * (h + np.swapaxes(h, -1, -2))


def laplacian_g(du, ddu, jet: MetricJet, gamma=None):
    """Trace of the covariant Hessian."""
    h = hessian_g(du, ddu, jet, gamma)
    if jet.identity:
        return np.trace(h, axis1=-2, axis2=-1)
    return np.einsum("...ij,...ij->...", jet.ginv, h)


def laplacian_divergence(du, ddu, jet: MetricJet):
    """(1/sqrt det g) d_i (sqrt det g g^{ij} d_j u), without Christoffel symbols."""
    if jet.identity:
        return np.trace(ddu, axis1=-2, axis2=-1)
    ginv = jet.ginv
    # d_i log sqrt det g = 1/2 tr(g^{-1} d_i g)
    dlogvol = 0.5 * np.einsum("...ab,...iba->...i", ginv, jet.dg)
    # d_i g^{ij} = - g^{ia} d_i g_ab g^{bj}
    div_ginv = -np.einsum("...ia,...iab,...bj->...j", ginv, jet.dg, ginv)
    return (
        np.einsum("...i,...ij,...j->...", dlogvol, ginv, du)
        + np.einsum("...j,...j->...", div_ginv, du)
        + np.einsum("...ij,...ij->...", ginv, ddu)
    )


def d_christoffel(jet: MetricJet) -> np.ndarray:
    """dgam[m, k, i, j] = d_m Gamma^k_ij, assembled from exact second partials."""
    if jet.d2g is None:
        raise ValueError("metric jet needs order 2 for curvature")
    if jet.identity:
        n = jet.g.shape[-1]
        return np.zeros(jet.g.shape[:-2] + (n, n, n, n))
    dg, d2g, ginv = jet.dg, jet.d2g, jet.ginv
    t = np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg
    # dt[m, l, i, j] = d_m d_i g_jl + d_m d_j g_il - d_m d_l g_ij
    dt = (
        np.einsum("...mijl->...mlij", d2g)
        + np.einsum("...mjil->...mlij", d2g)
        - d2g
    )
    dginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, dg, ginv)
    out = 0.5 * (
        np.einsum("...mkl,...lij->...mkij", dginv, t) + np.einsum("...kl,...mlij->...mkij", ginv, dt)
    )
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def riemann(jet: MetricJet, gamma=None) -> np.ndarray:
    """Fully covariant curvature tensor R_abcd."""
    if gamma is None:
        gamma = christoffel(jet)
    dgam = d_christoffel(jet)
    # R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    up = (
        np.einsum("...cadb->...abcd", dgam)
        - np.einsum("...dacb->...abcd", dgam)
        + np.einsum("...ace,...edb->...abcd", gamma, gamma)
        - np.einsum("...ade,...ecb->...abcd", gamma, gamma)
    )
    return np.einsum("...ae,...ebcd->...abcd", jet.g, up)


def scalar_curvature_from_jet(jet: MetricJet) -> np.ndarray:
    if jet.identity:
        return np.zeros(jet.g.shape[:-2])
    r = riemann(jet)
    # Ric_bd = g^{ac} R_abcd ; R = g^{bd} Ric_bd
    return np.einsum("...ac,...bd,...abcd->...", jet.ginv, jet.ginv, r)


def scalar_curvature(field: MetricField, x, params=None):
    """Scalar curvature of ``field`` at ``x`` (single point or batch)."""
    return scalar_curvature_from_jet(metric_jet(field, x, order=2, params=params))


def level_set_mean_curvature(du, ddu, jet: MetricJet, gamma=None):
    """Mean curvature of the level set of ``u`` through each point.

    (Delta_g u - Hess_g u(nu, nu)) / |grad u|_g with nu = grad u / |grad u|,
    positive for convex sublevel sets.
    """
    grad = raise_index(du, jet)
    nrm = np.sqrt(np.einsum("...i,...i->...", du, grad))
    nu = grad / nrm[..., None]
    h = hessian_g(du, ddu, jet, gamma)
    if jet.identity:
        lap = np.trace(h, axis1=-2, axis2=-1)
    else:
        lap = np.einsum("...ij,...ij->...", jet.ginv, h)
    hnn = np.einsum("...i,...ij,...j->...", nu, h, nu)
    return (lap - hnn) / nrm
