import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvlab import _kernels_py, kernels, morrey, scenario
from curvlab import surface as sf
from curvlab.domain import PolytopeDomain


@pytest.fixture(scope="module")
def sphere_samples():
    d = PolytopeDomain.from_strings(["x1^2 + x2^2 + x3^2 - 1"], 3, [0.0, 0.0, 0.0])
    return sf.sample_surface(d, 10.0, 4096)


@pytest.fixture(scope="module")
def curved_sweep():
    """Curved-convex sweep at reduced resolution, for sigma 1 and 1.4."""
    d = scenario.load_scenario("curved-convex").domain
    samples = [sf.sample_surface(d, lam, 2**12) for lam in (50.0, 100.0, 200.0, 400.0)]
    return {s: [morrey.morrey_sup(x, morrey.MorreyConfig(sigma=s)) for x in samples] for s in (1.0, 1.4)}


# ------------------------------------------------------------- integrals


def test_sphere_area(sphere_samples):
    assert morrey.surface_integral(sphere_samples) == pytest.approx(4 * math.pi, rel=5e-3)
    d = PolytopeDomain.from_strings(["x1^2 + x2^2 + x3^2 - 1"], 3, [0.0, 0.0, 0.0])
    assert morrey.surface_integral(sf.sample_surface(d, 10.0, 2**16)) == pytest.approx(4 * math.pi, rel=5e-4)


def test_cube_area_at_large_lambda(cube):
    assert morrey.surface_integral(sf.sample_surface(cube, 400.0, 2**14)) == pytest.approx(24.0, rel=1e-2)


def test_disjoint_ball_integrates_to_zero(sphere_samples):
    assert morrey.surface_integral(sphere_samples, ball=([3.0, 0.0, 0.0], 1.0)) == 0.0


def test_integral_accepts_callables(sphere_samples):
    a = morrey.surface_integral(sphere_samples, lambda s: s.x[:, 2] ** 2)
    assert a == pytest.approx(4 * math.pi / 3, rel=5e-3)


@pytest.mark.parametrize("name", ["cube", "curved-convex", "simplex", "conformal-cube"])
def test_quadrature_convergence_gate(name):
    d = scenario.load_scenario(name).domain
    a = morrey.surface_integral(sf.sample_surface(d, 200.0, 2**14))
    b = morrey.surface_integral(sf.sample_surface(d, 200.0, 2**16))
    assert abs(a - b) / b < 1e-2


# ------------------------------------------------------------ Morrey sup


def test_zero_field_gives_exact_zero(sphere_samples):
    e = morrey.morrey_sup(sphere_samples, morrey.MorreyConfig(), f=np.zeros(len(sphere_samples)))
    assert e.morrey_sup == 0.0 and not e.table.any()


def test_flat_sphere_V_vanishes_to_rounding(sphere_samples):
    e = morrey.morrey_sup(sphere_samples, morrey.MorreyConfig())
    assert 0.0 <= e.morrey_sup < 1e-12
    assert 0.0 <= e.sup_neg_v < 1e-12


@given(st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
def test_homogeneity_and_consistency(c, seed):
    d = PolytopeDomain.from_strings(["x1^2 + x2^2 + x3^2 - 1"], 3, [0.0, 0.0, 0.0])
    s = _SPHERE_SMALL.setdefault(0, sf.sample_surface(d, 10.0, 512))
    f = np.random.default_rng(seed).random(len(s)) * (s.x[:, 0] > 0.2)
    cfg = morrey.MorreyConfig(radii=(0.1, 0.3, 1.0))
    a = morrey.morrey_sup(s, cfg, f=f)
    b = morrey.morrey_sup(s, cfg, f=c * f)
    assert a.morrey_sup >= 0.0
    assert b.morrey_sup == pytest.approx(c * a.morrey_sup, rel=1e-12)
    assert a.morrey_sup >= a.table.max() and a.morrey_sup == a.table.max()
    assert np.all(a.table >= 0.0)


_SPHERE_SMALL = {}


def test_spherical_cap_against_closed_form_and_brute_force(sphere_samples):
    s = sphere_samples
    rho = 0.5  # chord radius of the cap around the north pole
    f = (np.linalg.norm(s.x - [0.0, 0.0, 1.0], axis=1) <= rho).astype(float)
    radii = tuple(np.geomspace(0.05, 1.0, 10).tolist()) + (rho,)
    # B_r(pole) meets the unit sphere in a cap of area pi r^2, so the sup is pi*rho at r = rho
    _, _, acc = morrey.morrey_values(s, f, 1.0, [rho], np.array([[0.0, 0.0, 1.0]]))
    assert acc.sum() / rho == pytest.approx(math.pi * rho, rel=1e-3)
    e = morrey.morrey_sup(s, morrey.MorreyConfig(radii=radii), f=f)
    # centers are sample points, the nearest of which sits about 0.02 off the pole
    assert math.pi * rho * 0.95 <= e.morrey_sup <= math.pi * rho * (1 + 1e-3)
    assert e.argmax_r == pytest.approx(rho, rel=0.15)
    # brute force over the same centers on a 10x finer radius grid that contains the coarse one
    centers, coarse, _ = morrey.morrey_values(s, f, 1.0, morrey.scan_radii(radii))
    fine = np.union1d(np.geomspace(coarse.min(), 1.0, 10 * len(coarse)), coarse)
    dist = np.linalg.norm(centers[:, None, :] - s.x[None, :, :], axis=2)
    order = np.argsort(dist, axis=1)
    mass = np.cumsum((f * s.w)[order], axis=1)
    brute = 0.0
    for c in range(len(centers)):
        k = np.searchsorted(dist[c, order[c]], fine, side="right")
        inside = np.where(k > 0, mass[c, np.maximum(k - 1, 0)], 0.0)
        brute = max(brute, float((inside / fine).max()))
    assert e.morrey_sup <= brute * (1 + 1e-12)
    assert e.morrey_sup >= brute * (1 - 2e-2)


def test_region_split_sums_to_total(curved_sweep):
    for e in curved_sweep[1.0]:
        assert e.stratum_by_radius.max() <= e.morrey_sup * (1 + 1e-12)


# ------------------------------------------------------------- kernels


def _brute_accumulate(centers, points, fw, radii, lf, lv):
    out = np.zeros((len(centers), 3, len(radii)))
    for c, p in enumerate(centers):
        dist = np.linalg.norm(points - p, axis=1)
        for j, r in enumerate(radii):
            kind = np.where(j < lf, 0, np.where(j >= np.maximum(lf, lv), 2, 1))
            for k in range(3):
                out[c, k, j] = fw[(dist <= r) & (kind == k)].sum()
    return out


@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(0, 60), st.integers(1, 8))
def test_backends_match_brute_force(seed, C, S, R):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(C, 3))
    points = rng.normal(size=(S, 3))
    fw = rng.random(S)
    radii = np.sort(rng.uniform(0.05, 2.0, R))
    lf = rng.integers(0, R + 1, S)
    lv = rng.integers(0, R + 1, S)
    want = _brute_accumulate(centers, points, fw, radii, lf, lv)
    for name, fn in kernels.BACKENDS.items():
        np.testing.assert_allclose(fn(centers, points, fw, radii, lf, lv), want, rtol=1e-12, atol=1e-12, err_msg=name)


def test_backend_switch():
    before = kernels.BACKEND
    try:
        kernels.use_backend("python")
        assert kernels.BACKEND == "python"
        with pytest.raises(ValueError, match="not available"):
            kernels.use_backend("fortran")
    finally:
        kernels.use_backend(before)
    assert kernels.BACKENDS["python"] is _kernels_py.ball_accumulate


def test_compiled_kernel_is_built():
    assert "cython" in kernels.BACKENDS, "build the extension with `pip install -e . --no-build-isolation`"
    assert kernels.BACKEND == "cython"


# ------------------------------------------------------------ config


@pytest.mark.parametrize("sigma", [0.5, 0.99, 1.5, 2.0])
def test_sigma_outside_range_is_rejected(sigma):
    with pytest.raises(ValueError, match="sigma"):
        morrey.MorreyConfig(sigma=sigma)


def test_radii_must_lie_in_unit_interval():
    with pytest.raises(ValueError, match="radii"):
        morrey.MorreyConfig(radii=(0.5, 1.5))
    cfg = morrey.MorreyConfig()
    assert len(cfg.radii) == 16 and cfg.radii[0] == pytest.approx(0.02) and cfg.radii[-1] == pytest.approx(1.0)
    assert len(morrey.scan_radii(cfg.radii)) == 32


# ----------------------------------------------------------- sweeps


def test_flat_cube_sweep_is_identically_zero(cube):
    cfg = morrey.MorreyConfig(rays=2048)
    entries = morrey.lambda_sweep(cube, cfg)
    assert len(entries) == 4
    for e in entries:
        row = e.row()
        assert all(row[k] == 0.0 for k in ("sup_neg_v", "sup_neg_v_over_lambda", "morrey_sup", "face_sup", "edge_sup", "vertex_sup"))
    fits = morrey.region_bound_report(entries, cfg.sigma, cube)
    assert [f.status for f in fits] == ["identically zero"] * 3


def test_sweep_rejects_small_lambda(cube):
    with pytest.raises(sf.LambdaError):
        morrey.lambda_sweep(cube, morrey.MorreyConfig(lambdas=(1.0,), rays=64))


def test_structurally_empty_strata():
    d = PolytopeDomain.from_strings(["x1^2 + x2^2 + x3^2 - 1", "x3 - 0.5"], 3, [0.0, 0.0, 0.0])
    cfg = morrey.MorreyConfig(lambdas=(50.0, 100.0), rays=2048)
    fits = morrey.region_bound_report(morrey.lambda_sweep(d, cfg), cfg.sigma, d)
    assert fits[2].status in ("empty", "identically zero")


def _decay_slope(entries, kind, r):
    k = sf.KIND_NAMES.index(kind)
    j = int(np.argmin(np.abs(entries[0].radii - r)))
    vals = np.array([e.stratum_by_radius[k, j] for e in entries])
    lams = np.array([e.lam for e in entries])
    live = vals > 0
    return np.polyfit(np.log(lams[live]), np.log(vals[live]), 1)[0], vals


def test_edge_stratum_decays_for_sigma_one(curved_sweep):
    assert morrey.model_exponent("edge", 1.0) < 0
    slope, vals = _decay_slope(curved_sweep[1.0], "edge", 0.5)
    assert slope < 0 and np.all(np.diff(vals) <= 0)


def test_vertex_stratum_decays_for_sigma_1_4(curved_sweep):
    assert morrey.model_exponent("vertex", 1.4) < 0
    slope, vals = _decay_slope(curved_sweep[1.4], "vertex", 0.5)
    assert slope < 0 and np.all(np.diff(vals) <= 0)


def test_region_fits_report_residuals(curved_sweep):
    fits = morrey.region_bound_report(curved_sweep[1.0], 1.0, scenario.load_scenario("curved-convex").domain)
    assert [f.kind for f in fits] == ["face", "edge", "vertex"]
    edge = fits[1]
    assert edge.status == "fitted"
    for row in edge.rows:
        assert row["asymptotic"] == (row["lambda_r"] >= 20)
        if row["measured"] > 0:
            assert row["residual"] == pytest.approx(math.log(row["measured"]) - edge.log_c - math.log(row["model"]))


@pytest.mark.parametrize("name", ["cube", "simplex", "ball", "curved-convex", "scaled-cube"])
def test_decay_direction_on_hypothesis_satisfying_scenarios(name):
    sc = scenario.load_scenario(name)
    assert scenario.load_scenario(name) and sc.domain is not None
    cfg = morrey.MorreyConfig(lambdas=(50.0, 400.0), rays=2**13)
    first, last = morrey.lambda_sweep(sc.domain, cfg)
    assert last.morrey_sup <= first.morrey_sup + 1e-12
