"""Subcommand bodies. Each returns plain data (dicts/lists) ready for serialization."""

from __future__ import annotations

import dataclasses
import sys

import numpy as np

from . import clifford, domain, exterior, morrey
from . import surface as sf
from .scenario import Scenario

SWEEP_COLUMNS = ("lambda", "sigma", "sup_neg_v", "sup_neg_v_over_lambda", "morrey_sup")
STRATUM_COLUMNS = ("argmax_r", "face_sup", "edge_sup", "vertex_sup")
SAMPLE_KIND_RADIUS = 1.0


def sweep_columns(n: int) -> tuple:
    return SWEEP_COLUMNS + tuple(f"argmax_p{a + 1}" for a in range(n)) + STRATUM_COLUMNS


def _config(sc: Scenario, lambdas=None, rays=None, sigma=None, workers=None) -> morrey.MorreyConfig:
    cfg = sc.morrey
    changes = {}
    if lambdas is not None:
        changes["lambdas"] = tuple(lambdas)
    if rays is not None:
        changes["rays"] = int(rays)
    if sigma is not None:
        changes["sigma"] = float(sigma)
    if workers is not None:
        changes["workers"] = int(workers)
    return dataclasses.replace(cfg, **changes)


def _require(sc: Scenario, kind: str):
    if sc.kind != kind:
        raise ValueError(f"scenario {sc.name!r} is of kind {sc.kind!r}; this subcommand needs {kind!r}")


def hypotheses(sc: Scenario) -> dict:
    if sc.kind == "exterior":
        rep = exterior.prop42_pipeline(sc.exterior, sc.grid)
        rows = [r for r in rep["checks"] if r["kind"] == "hypothesis"]
        return {"scenario": sc.name, "checks": rows, "passed": all(r["passed"] for r in rows)}
    res = domain.run_hypotheses(sc.domain, sc.boundary_samples, sc.tolerances)
    return {"scenario": sc.name, **res}


def warn_hypotheses(sc: Scenario) -> dict:
    res = hypotheses(sc)
    if not res["passed"]:
        failed = sorted(k for k, v in res.items() if isinstance(v, dict) and v.get("passed") is False)
        print(f"warning: {sc.name}: hypothesis checks failed: {', '.join(failed)}", file=sys.stderr)
    return res


def _surface_diagnostics(samples: sf.SampleSet) -> dict:
    g_inf, s_inf, c0_inf = sf.c_constants(samples)
    gap = samples.H - samples.trN - samples.V
    return {
        "lambda": samples.lam,
        "samples": len(samples),
        "area": morrey.surface_integral(samples),
        "max_surface_residual": float(np.abs(samples.residual).max()),
        "proposition_min_gap": float(gap.min()),
        "max_h_path_difference": float(np.abs(samples.H - samples.H_levelset).max()),
        "inf_weighted_covector_g": g_inf,
        "inf_weighted_normal_g0": s_inf,
        "inf_weighted_covector_g0": c0_inf,
        "neg_v_integral": morrey.surface_integral(samples, morrey.negative_part(samples.V)),
        "boundary_term": morrey.surface_integral(samples, samples.H - samples.trN),
    }


def _sample_rows(samples: sf.SampleSet) -> list[dict]:
    kinds = sf.region_kinds(samples.u, samples.lam, SAMPLE_KIND_RADIUS)
    n = samples.x.shape[1]
    rows = []
    for p in range(len(samples)):
        row = {f"x{a + 1}": samples.x[p, a] for a in range(n)}
        row.update({f"nu{a + 1}": samples.nu[p, a] for a in range(n)})
        row.update({f"N{a + 1}": samples.N[p, a] for a in range(n)})
        row.update(
            {
                "H": samples.H[p],
                "trN": samples.trN[p],
                "V": samples.V[p],
                "w": samples.w[p],
                "region": sf.KIND_NAMES[kinds[p]],
            }
        )
        rows.append(row)
    return rows


def sample_columns(n: int) -> tuple:
    return (
        tuple(f"x{a + 1}" for a in range(n))
        + tuple(f"nu{a + 1}" for a in range(n))
        + tuple(f"N{a + 1}" for a in range(n))
        + ("H", "trN", "V", "w", "region")
    )


@dataclasses.dataclass
class SweepResult:
    entries: list
    diagnostics: list
    samples: list  # SampleSet per lambda (kept only on request)
    config: morrey.MorreyConfig


def sweep(sc: Scenario, lambdas=None, rays=None, sigma=None, workers=None, keep_samples=False) -> SweepResult:
    _require(sc, "polytope")
    cfg = _config(sc, lambdas, rays, sigma, workers)
    d = sc.domain
    lam0 = d.lambda0()
    for lam in cfg.lambdas:
        if lam < lam0:
            raise sf.LambdaError(f"lambda={lam:g} is below lambda0={lam0:.6g}")
    entries, diags, kept = [], [], []
    for lam in cfg.lambdas:
        samples = sf.sample_surface(
            d, lam, cfg.rays, weights=cfg.weights, workers=cfg.workers, residual_tol=sc.tolerances["surface_residual"]
        )
        entries.append(morrey.morrey_sup(samples, cfg))
        diags.append(_surface_diagnostics(samples))
        if keep_samples:
            kept.append(samples)
    return SweepResult(entries, diags, kept, cfg)


def sweep_rows(res: SweepResult) -> list[dict]:
    return [e.row() for e in res.entries]


def morrey_report(sc: Scenario, res: SweepResult) -> dict:
    fits = morrey.region_bound_report(res.entries, res.config.sigma, sc.domain)
    return {
        "scenario": sc.name,
        "sigma": res.config.sigma,
        "rays": res.config.rays,
        "radii": list(res.config.radii),
        "rows": sweep_rows(res),
        "surface": res.diagnostics,
        "region_fits": [
            {"stratum": f.kind, "status": f.status, "log_c": f.log_c, "rows": f.rows} for f in fits
        ],
    }


def clifford_check(dims=(3, 5, 7), pairs: int = 100) -> dict:
    rows = [clifford.residuals(n, pairs) for n in dims]
    return {"dimensions": list(dims), "rows": rows}


def imcf(sc: Scenario) -> dict:
    _require(sc, "exterior")
    ext = sc.exterior
    return {
        "scenario": sc.name,
        "flow": exterior.flow_trace(ext, sc.grid),
        "prop42": exterior.prop42_pipeline(ext, sc.grid),
    }


def report(sc: Scenario, lambdas=None, rays=None, sigma=None, workers=None) -> dict:
    """Everything for one scenario; hypothesis failures are reported, not raised."""
    out = {"scenario": sc.name, "kind": sc.kind, "hypotheses": hypotheses(sc)}
    if sc.kind == "exterior":
        out.update(imcf(sc))
        return out
    res = sweep(sc, lambdas, rays, sigma, workers)
    out["morrey"] = morrey_report(sc, res)
    if sc.domain.n % 2 == 1 and sc.domain.n >= 3:
        out["clifford"] = clifford.residuals(sc.domain.n, pairs=20)
    return out
