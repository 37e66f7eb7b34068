"""Morrey-type norms of the negative part of V on sampled surfaces.

For a center ``p`` and radius ``r`` the tabulated value is

    (r^(sigma + 1 - n) * sum_{|x - p| <= r} max(-V, 0)^sigma * w)^(1/sigma)

with ``w`` the g-area quadrature weight of each sample. Each ball sum is
also split by region kind (face, edge, vertex), where a sample's kind
depends on the radius through the thresholds in ``surface.region_kinds``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import surface as sf

RMIN = 0.02
ASYMPTOTIC_LR = 20.0


@dataclass(frozen=True)
class MorreyConfig:
    sigma: float = 1.0
    radii: tuple = ()
    lambdas: tuple = (50.0, 100.0, 200.0, 400.0)
    rays: int = 2**14
    weights: str = "g"
    workers: int = 1

    def __post_init__(self):
        if not 1.0 <= self.sigma < 1.5:
            raise ValueError(f"sigma must lie in [1, 3/2), got {self.sigma}")
        radii = tuple(float(r) for r in (self.radii or default_radii()))
        if any(not 0.0 < r <= 1.0 for r in radii):
            raise ValueError("radii must lie in (0, 1]")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))


def default_radii(count: int = 16, r_min: float = RMIN) -> tuple:
    return tuple(np.geomspace(r_min, 1.0, count).tolist())


def scan_radii(radii) -> np.ndarray:
    """The configured radii together with their halves, sorted and deduplicated."""
    r = np.asarray(radii, dtype=float)
    return np.unique(np.concatenate([r, 0.5 * r]))


def surface_integral(samples: sf.SampleSet, f=None, ball=None) -> float:
    """Quadrature of ``f`` over the sampled surface or over ``surface ∩ B_r(p)``.

    ``f`` is a per-sample array, a callable on the sample set, or None for 1.
    """
    if len(samples) == 0:
        raise ValueError("empty sample set")
    vals = np.ones(len(samples)) if f is None else np.asarray(f(samples) if callable(f) else f, dtype=float)
    mask = np.ones(len(samples), dtype=bool)
    if ball is not None:
        p, r = ball
        mask = np.linalg.norm(samples.x - np.asarray(p, dtype=float), axis=1) <= r
    return float(np.sum(vals[mask] * samples.w[mask]))


def negative_part(V) -> np.ndarray:
    return np.maximum(-np.asarray(V, dtype=float), 0.0)


def stratum_centers(samples: sf.SampleSet, r_max: float) -> np.ndarray:
    """Centroids of samples grouped by (kind at ``r_max``, top three face indices)."""
    if len(samples) == 0:
        return np.zeros((0, samples.x.shape[1]))
    kinds = sf.region_kinds(samples.u, samples.lam, r_max)
    order, _ = sf.sorted_faces(samples.u)
    top = np.full((len(samples), 3), -1)
    k = min(3, order.shape[1])
    top[:, :k] = order[:, :k]
    keys = np.column_stack([kinds, top])
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    counts = np.bincount(inv, minlength=len(uniq)).astype(float)
    cents = np.stack([np.bincount(inv, samples.x[:, a], minlength=len(uniq)) for a in range(samples.x.shape[1])], axis=1)
    return cents / counts[:, None]


def kind_thresholds(u, lam: float, radii):
    """First radius index where each sample leaves the face stratum / enters the vertex one."""
    kinds = sf.region_kinds(u, lam, np.asarray(radii))  # (S, R), nondecreasing along R
    R = kinds.shape[1]
    not_face = kinds != sf.FACE
    vert = kinds == sf.VERTEX
    lf = np.where(not_face.any(axis=1), np.argmax(not_face, axis=1), R)
    lv = np.where(vert.any(axis=1), np.argmax(vert, axis=1), R)
    return lf.astype(np.int64), lv.astype(np.int64)


@dataclass
class MorreyEntry:
    lam: float
    sigma: float
    sup_neg_v: float
    morrey_sup: float
    argmax_p: np.ndarray
    argmax_r: float
    stratum_sup: dict
    radii: np.ndarray
    stratum_by_radius: np.ndarray = field(repr=False)  # (3, R) sup over centers
    table: np.ndarray = field(repr=False)  # (C, R) total values

    @property
    def sup_neg_v_over_lambda(self) -> float:
        return self.sup_neg_v / self.lam

    def row(self) -> dict:
        out = {
            "lambda": self.lam,
            "sigma": self.sigma,
            "sup_neg_v": self.sup_neg_v,
            "sup_neg_v_over_lambda": self.sup_neg_v_over_lambda,
            "morrey_sup": self.morrey_sup,
        }
        for a, v in enumerate(self.argmax_p):
            out[f"argmax_p{a + 1}"] = float(v)
        out["argmax_r"] = self.argmax_r
        for name in sf.KIND_NAMES:
            out[f"{name}_sup"] = self.stratum_sup[name]
        return out


def _scale(acc, radii, sigma, n):
    return (radii ** (sigma + 1.0 - n) * acc) ** (1.0 / sigma)


def morrey_values(samples: sf.SampleSet, f, sigma: float, radii, centers=None):
    """Ball values for per-sample field ``f`` (already nonnegative).

    Returns ``(centers, radii, per_kind)`` where ``per_kind`` is ``(C, 3, R)``
    before the radius scaling and the 1/sigma power.
    """
    radii = np.asarray(radii, dtype=float)
    if centers is None:
        centers = np.concatenate([samples.x, stratum_centers(samples, float(radii.max()))])
    f = np.asarray(f, dtype=float)
    live = f > 0.0
    fw = f[live] ** sigma * samples.w[live]
    lf, lv = kind_thresholds(samples.u[live], samples.lam, radii)
    acc = kernels.ball_accumulate(centers, samples.x[live], fw, radii, lf, lv)
    return centers, radii, acc


def morrey_sup(samples: sf.SampleSet, cfg: MorreyConfig, f=None) -> MorreyEntry:
    """Sup of the Morrey ball values of ``max(-V, 0)`` (or of ``f``) over the (p, r) grid."""
    n = samples.x.shape[1]
    field_ = negative_part(samples.V) if f is None else np.asarray(f, dtype=float)
    centers, radii, acc = morrey_values(samples, field_, cfg.sigma, scan_radii(cfg.radii))
    total = _scale(acc.sum(axis=1), radii, cfg.sigma, n)
    per_kind = _scale(acc, radii[None, None, :], cfg.sigma, n)
    c, j = np.unravel_index(int(np.argmax(total)), total.shape) if total.size else (0, 0)
    best = float(total[c, j]) if total.size else 0.0
    by_r = per_kind.max(axis=0) if per_kind.size else np.zeros((3, len(radii)))
    return MorreyEntry(
        lam=samples.lam,
        sigma=cfg.sigma,
        sup_neg_v=float(field_.max(initial=0.0)),
        morrey_sup=best,
        argmax_p=np.asarray(centers[c], dtype=float),
        argmax_r=float(radii[j]),
        stratum_sup={name: float(by_r[k].max(initial=0.0)) for k, name in enumerate(sf.KIND_NAMES)},
        radii=radii,
        stratum_by_radius=by_r,
        table=total,
    )


def lambda_sweep(d, cfg: MorreyConfig) -> list[MorreyEntry]:
    """One Morrey entry per lambda in ``cfg.lambdas``."""
    lam0 = d.lambda0()
    for lam in cfg.lambdas:
        if lam < lam0:
            raise sf.LambdaError(f"lambda={lam:g} is below lambda0={lam0:.6g}")
    entries = []
    for lam in cfg.lambdas:
        samples = sf.sample_surface(d, lam, cfg.rays, weights=cfg.weights, workers=cfg.workers)
        entries.append(morrey_sup(samples, cfg))
    return entries


# ---------------------------------------------------------- region bounds


def model_curve(kind: str, lr, sigma: float):
    lr = np.asarray(lr, dtype=float)
    if kind == "face":
        return lr * np.exp(-(lr ** 0.125))
    if kind == "edge":
        return lr ** (0.125 - 7.0 / (8.0 * sigma))
    if kind == "vertex":
        return lr ** (1.0 - 3.0 / (2.0 * sigma))
    raise ValueError(f"unknown stratum {kind!r}")


def model_exponent(kind: str, sigma: float) -> float | None:
    """Power of (lambda r) in the edge and vertex model curves."""
    if kind == "edge":
        return 0.125 - 7.0 / (8.0 * sigma)
    if kind == "vertex":
        return 1.0 - 3.0 / (2.0 * sigma)
    return None


@dataclass
class StratumFit:
    kind: str
    status: str  # "fitted" | "identically zero" | "empty" | "pre-asymptotic only"
    log_c: float | None
    rows: list  # dicts: lambda, r, lambda_r, measured, model, asymptotic, residual


def region_bound_report(entries: list[MorreyEntry], sigma: float, d=None) -> list[StratumFit]:
    """Fit ``C * model(lambda r)`` to each stratum's sup-over-centers values.

    Only rows with ``lambda r >= 20`` and a positive measured value enter
    the least-squares fit of ``log C``; every row keeps its residual.
    """
    all_zero = all(e.sup_neg_v == 0.0 for e in entries)
    structurally_empty = set()
    if d is not None and d.k <= 2:
        structurally_empty.add("vertex")
    if d is not None and d.k == 1:
        structurally_empty.add("edge")
    fits = []
    for k, kind in enumerate(sf.KIND_NAMES):
        rows = []
        for e in entries:
            for j, r in enumerate(e.radii):
                lr = e.lam * r
                rows.append(
                    {
                        "lambda": e.lam,
                        "r": float(r),
                        "lambda_r": float(lr),
                        "measured": float(e.stratum_by_radius[k, j]),
                        "model": float(model_curve(kind, lr, sigma)),
                        "asymptotic": bool(lr >= ASYMPTOTIC_LR),
                    }
                )
        use = [row for row in rows if row["asymptotic"] and row["measured"] > 0.0]
        if all_zero:
            status, log_c = "identically zero", None
        elif kind in structurally_empty or not any(row["measured"] > 0.0 for row in rows):
            status, log_c = "empty", None
        elif not use:
            status, log_c = "pre-asymptotic only", None
        else:
            status = "fitted"
            log_c = float(np.mean([math.log(row["measured"]) - math.log(row["model"]) for row in use]))
        for row in rows:
            if log_c is not None and row["measured"] > 0.0:
                row["residual"] = math.log(row["measured"]) - log_c - math.log(row["model"])
            else:
                row["residual"] = None
        fits.append(StratumFit(kind, status, log_c, rows))
    return fits
