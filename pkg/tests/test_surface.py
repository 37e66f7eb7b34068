import math

import mpmath
import numpy as np
import pytest
from conftest import CUBE_FACES, conformal
from hypothesis import given
from hypothesis import strategies as st

from curvlab import domain as dm
from curvlab import rays
from curvlab import riemann as rg
from curvlab import scenario
from curvlab import surface as sf
from curvlab.domain import PolytopeDomain


@pytest.fixture(scope="module")
def unit_sphere():
    # u = |x|^2 - 1, so |du| = 2 on the surface
    return PolytopeDomain.from_strings(["x1^2 + x2^2 + x3^2 - 1"], 3, [0.0, 0.0, 0.0])


@pytest.fixture(scope="module")
def plane():
    return PolytopeDomain.from_strings(["x3 - 1"], 3, [0.0, 0.0, 0.0])


def _dirs(rng, count, n=3):
    v = rng.normal(size=(count, n))
    return v / np.linalg.norm(v, axis=1)[:, None]


# ------------------------------------------------------------------ raycast


def test_single_face_sphere_ray_length_is_one(unit_sphere, rng):
    for lam in (1.0, 50.0, 400.0):
        _, t = sf.raycast(unit_sphere, lam, _dirs(rng, 20))
        np.testing.assert_allclose(t, 1.0, rtol=1e-13)


def test_cube_ray_along_axis_matches_bisection(cube):
    lam = 100.0
    x, t = sf.raycast(cube, lam, [[1.0, 0.0, 0.0]])
    mpmath.mp.dps = 40
    L = mpmath.mpf(lam)

    def F(s):
        return mpmath.exp(L * (s - 1)) + mpmath.exp(L * (-s - 1)) + 4 * mpmath.exp(-L) - 1

    lo, hi = mpmath.mpf(0), mpmath.mpf(1)
    for _ in range(120):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if F(mid) < 0 else (lo, mid)
    assert t[0] == pytest.approx(float(lo), abs=1e-12)
    assert abs(float(np.sum(np.exp(lam * cube.values(x[0])))) - 1.0) < 1e-12


def test_ray_length_grows_with_lambda_and_stays_inside(cube):
    dirs = rays.sphere_directions(200, 3)
    prev = np.zeros(len(dirs))
    for lam in (10.0, 50.0, 100.0, 200.0, 400.0):
        _, t = sf.raycast(cube, lam, dirs)
        assert np.all(t >= prev)
        prev = t
    assert np.all(prev <= (1.0 + 1e-14) / np.abs(dirs).max(axis=1))


def test_lambda_below_threshold_is_rejected(cube):
    with pytest.raises(sf.LambdaError, match="lambda0=1.79176"):
        sf.raycast(cube, 1.0, [[1.0, 0.0, 0.0]])


def test_unbounded_ray_is_reported():
    slab = PolytopeDomain.from_strings(["x1 - 1", "-x1 - 1"], 2, [0.0, 0.0])
    with pytest.raises(dm.DomainError, match="no crossing"):
        sf.raycast(slab, 10.0, [[0.0, 1.0]])


# ------------------------------------------------------------------ normals


def test_single_face_normals_are_face_normals(rng):
    d = PolytopeDomain.from_strings(
        ["x1^2 + 2*x2^2 + x3^2 - 1"], 3, [0.0, 0.0, 0.0], metric=[["1 + 0.2*x1^2", "0.1*x3", "0"], ["1", "0"], ["1.5"]]
    )
    X, _ = sf.raycast(d, 50.0, _dirs(rng, 20))
    nu, N = sf.normals(d, 50.0, X)
    N1, nu1 = dm.face_normals(d, X, 0)
    np.testing.assert_allclose(nu, nu1, atol=1e-14)
    np.testing.assert_allclose(N, N1, atol=1e-14)


def test_flat_metric_normals_coincide(curved, rng):
    X, _ = sf.raycast(curved, 100.0, _dirs(rng, 50))
    ev = sf.evaluate(curved, 100.0, X)
    np.testing.assert_allclose(ev.nu, ev.N, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(ev.N, axis=1), 1.0, atol=1e-12)


def test_edge_region_normal_is_weighted_face_mean(cube):
    lam = 200.0
    X, _ = sf.raycast(cube, lam, [[1.0, 1.0, 0.1] / np.linalg.norm([1.0, 1.0, 0.1])])
    nu, _ = sf.normals(cube, lam, X)
    x = X[0]
    w1, w2 = math.exp(lam * (x[0] - 1)), math.exp(lam * (x[1] - 1))
    w3 = math.exp(lam * (x[2] - 1)) - math.exp(lam * (-x[2] - 1))
    direct = np.array([w1, w2, w3]) - np.array([math.exp(lam * (-x[0] - 1)), math.exp(lam * (-x[1] - 1)), 0.0])
    np.testing.assert_allclose(nu[0], direct / np.linalg.norm(direct), atol=1e-12)


def test_sample_normals_are_unit(conformal_cube):
    s = sf.sample_surface(conformal_cube, 100.0, 512)
    jet = conformal_cube.metric_jet(s.x)
    np.testing.assert_allclose(rg.norm_g(s.nu, jet), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(s.N, axis=1), 1.0, atol=1e-12)
    assert np.abs(s.residual).max() < 1e-10


# ----------------------------------------------------------- mean curvature


def test_sphere_mean_curvature_any_lambda(unit_sphere, rng):
    for lam in (1.0, 100.0, 400.0):
        X, _ = sf.raycast(unit_sphere, lam, _dirs(rng, 20))
        np.testing.assert_allclose(sf.mean_curvature(unit_sphere, lam, X), 2.0, rtol=1e-13)


def test_cube_face_center_is_flat(cube):
    X, _ = sf.raycast(cube, 200.0, [[0.0, 0.0, 1.0]])
    ev = sf.evaluate(cube, 200.0, X)
    assert abs(ev.H[0]) < 1e-6
    assert abs(ev.H_levelset[0]) < 1e-6


@pytest.mark.parametrize("name", ["curved-convex", "conformal-cube", "simplex", "scaled-cube", "conformal-ball"])
def test_two_mean_curvature_paths_agree(name, rng):
    d = scenario.load_scenario(name).domain
    for lam in (50.0, 400.0):
        X, _ = sf.raycast(d, lam, _dirs(rng, 100))
        ev = sf.evaluate(d, lam, X)
        err = np.abs(ev.H - ev.H_levelset) / np.maximum(1.0, np.abs(ev.H))
        assert err.max() < 1e-8


# ----------------------------------------------------------------------- dN


def test_sphere_dN_is_identity(unit_sphere, rng):
    X, _ = sf.raycast(unit_sphere, 10.0, _dirs(rng, 10))
    M = sf.dN_matrix(unit_sphere, 10.0, X)
    np.testing.assert_allclose(np.linalg.svd(M, compute_uv=False), 1.0, atol=1e-13)


def test_plane_dN_is_zero(plane, rng):
    d = _dirs(rng, 10)
    d[:, 2] = np.abs(d[:, 2]) + 0.5
    d /= np.linalg.norm(d, axis=1)[:, None]
    X, _ = sf.raycast(plane, 10.0, d)
    assert np.abs(sf.dN_matrix(plane, 10.0, X)).max() == 0.0


@pytest.mark.parametrize("name", ["curved-convex", "conformal-cube", "ball"])
def test_dN_expansion_matches_finite_differences(name, rng):
    d = scenario.load_scenario(name).domain
    for lam in (50.0, 200.0):
        X, _ = sf.raycast(d, lam, _dirs(rng, 60))
        ev = sf.evaluate(d, lam, X, levelset=False)
        fd = sf.dN_finite_difference(d, lam, ev)
        assert np.abs(fd - ev.M).max() < 1e-5


def test_trace_norm_examples():
    assert dm.trace_norm(np.eye(2)) == 2.0
    assert dm.trace_norm(np.zeros((2, 2))) == 0.0


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_trace_norm_matches_eigen_oracle(entries):
    M = np.array(entries).reshape(2, 2)
    got = dm.trace_norm(M)
    scale = 1 + np.abs(M).max()
    # 2x2 closed form: (s1 + s2)^2 = |M|_F^2 + 2 |det M|
    assert got == pytest.approx(math.sqrt(np.sum(M * M) + 2 * abs(np.linalg.det(M))), abs=1e-12 * scale)
    ev = np.linalg.eigvalsh(M.T @ M)
    if ev[0] > 1e-6 * scale**2:
        # sqrt amplifies rounding in tiny eigenvalues, so the eigen route is only an oracle away from rank deficiency
        assert got == pytest.approx(np.sqrt(ev).sum(), abs=1e-12 * scale)


# ------------------------------------------------------------------------ V


@pytest.mark.parametrize("lam", [50.0, 100.0, 200.0, 400.0])
def test_flat_cube_V_vanishes(cube, lam):
    s = sf.sample_surface(cube, lam, 2048)
    assert np.abs(s.V).max() < 1e-8


def test_flat_simplex_V_nonnegative():
    d = scenario.load_scenario("simplex").domain
    for lam in (50.0, 200.0):
        s = sf.sample_surface(d, lam, 2048)
        assert s.V.min() >= -1e-10


def test_sphere_V_equals_H_minus_trN(unit_sphere, rng):
    X, _ = sf.raycast(unit_sphere, 30.0, _dirs(rng, 20))
    V, gap = sf.v_lambda(unit_sphere, 30.0, X)
    np.testing.assert_allclose(V, 0.0, atol=1e-13)
    np.testing.assert_allclose(gap, 0.0, atol=1e-13)


POLYTOPES = [n for n in scenario.shipped_names() if scenario.load_scenario(n).kind == "polytope"]


@pytest.mark.parametrize("name", POLYTOPES)
def test_mean_curvature_gap_dominates_V(name):
    sc = scenario.load_scenario(name)
    for lam in (50.0, 400.0):
        s = sf.sample_surface(sc.domain, lam, 2048)
        assert (s.H - s.trN - s.V).min() >= -1e-8


def test_V_is_sum_of_its_terms(curved, rng):
    X, _ = sf.raycast(curved, 100.0, _dirs(rng, 20))
    ev = sf.evaluate(curved, 100.0, X)
    np.testing.assert_allclose(ev.terms.sum(axis=1), ev.V, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(ev.terms[:, 0] + ev.terms[:, 1], ev.H, rtol=1e-15)


# ---------------------------------------------------------------- constants


def test_c_constants_of_sphere(unit_sphere):
    s = sf.sample_surface(unit_sphere, 20.0, 256)
    g_inf, s_inf, c0_inf = sf.c_constants(s)
    assert g_inf == pytest.approx(2.0, rel=1e-12)
    assert s_inf == pytest.approx(2.0, rel=1e-12)
    assert c0_inf == pytest.approx(2.0, rel=1e-12)


def test_c_constants_cube_are_lambda_independent(cube):
    vals = np.array([sf.c_constants(sf.sample_surface(cube, lam, 4096))[:2] for lam in (50.0, 100.0, 200.0)])
    assert np.all(vals > 0)
    assert np.all(vals.max(axis=0) / vals.min(axis=0) < 1.2)


@pytest.mark.parametrize("name", ["curved-convex", "conformal-cube", "simplex", "scaled-cube"])
def test_c_constants_positive(name):
    s = sf.sample_surface(scenario.load_scenario(name).domain, 100.0, 1024)
    assert min(sf.c_constants(s)) > 0


# ------------------------------------------------------------------ regions


def test_face_center_is_face(cube):
    X, _ = sf.raycast(cube, 200.0, [[0.0, 0.0, 1.0]])
    ev = sf.evaluate(cube, 200.0, X)
    sample = sf.SampleSet(
        200.0, np.array([[0.0, 0.0, 1.0]]), np.ones(1), X, ev.nu, ev.N, ev.H, ev.H_levelset, ev.trN, ev.V, ev.terms,
        np.ones(1), ev.u, ev.residual, ev.G_norm, ev.S_norm, ev.c0_norm,
    ).sample(0)
    tag = sf.classify_region(sample, 0.5)
    assert tag.kind == "face" and tag.indices[0] == 4
    assert sample.u_sorted[1] == -1.0
    assert sf.face_threshold(200.0, 0.5) == pytest.approx(200.0 ** -0.875 * 0.5**0.125, rel=1e-15)
    assert sf.face_threshold(200.0, 0.5) == pytest.approx(0.00889, abs=1e-5)


def _corner_sample(cube, lam):
    X, _ = sf.raycast(cube, lam, [np.ones(3) / math.sqrt(3)])
    u = cube.values(X)
    return u


@pytest.mark.parametrize("r", [0.02, 0.5, 1.0])
def test_corner_is_vertex(cube, r):
    u = _corner_sample(cube, 200.0)
    assert sf.region_kinds(u, 200.0, r)[0] == sf.VERTEX


def test_corner_is_face_below_the_threshold_crossover(cube):
    u = _corner_sample(cube, 200.0)
    assert sf.region_kinds(u, 200.0, 1e-3)[0] == sf.FACE


def test_region_tie_break_by_ascending_index():
    order, vals = sf.sorted_faces(np.array([[-0.1, -0.2, -0.1, -0.2]]))
    assert order[0].tolist() == [0, 2, 1, 3]
    assert vals[0].tolist() == [-0.1, -0.1, -0.2, -0.2]


def test_single_and_double_face_strata():
    u1 = np.array([[0.0]])
    assert sf.region_kinds(u1, 100.0, 0.5)[0] == sf.FACE
    u2 = np.array([[0.0, -1e-4]])
    assert sf.region_kinds(u2, 100.0, 0.5)[0] == sf.EDGE


@given(st.integers(0, 2**32 - 1), st.sampled_from([50.0, 100.0, 200.0, 400.0]))
def test_region_kind_is_monotone_in_radius(seed, lam):
    rng = np.random.default_rng(seed)
    u = -np.abs(rng.normal(scale=0.02, size=(50, 6))) * rng.choice([1e-3, 1.0, 10.0], size=(50, 1))
    u[:, 0] = 0.0
    radii = np.geomspace(1e-4, 1.0, 40)
    kinds = sf.region_kinds(u, lam, radii)
    assert np.all(np.diff(kinds, axis=1) >= 0)


# ---------------------------------------------------------------- sampling


def test_weights_switch(cube, conformal_cube, rng):
    X, _ = sf.raycast(conformal_cube, 100.0, _dirs(rng, 50))
    a = sf.evaluate(conformal_cube, 100.0, X, weights="g")
    b = sf.evaluate(conformal_cube, 100.0, X, weights="euclidean")
    np.testing.assert_array_equal(a.nu, b.nu)
    assert np.abs(a.N - b.N).max() > 0.0
    Xc, _ = sf.raycast(cube, 100.0, _dirs(rng, 50))
    np.testing.assert_array_equal(sf.evaluate(cube, 100.0, Xc).N, sf.evaluate(cube, 100.0, Xc, weights="euclidean").N)
    with pytest.raises(ValueError):
        sf.evaluate(cube, 100.0, Xc, weights="other")


def test_sampling_does_not_depend_on_workers(curved):
    a = sf.sample_surface(curved, 100.0, 3000, workers=1, chunk=512)
    b = sf.sample_surface(curved, 100.0, 3000, workers=3, chunk=512)
    c = sf.sample_surface(curved, 100.0, 3000)
    for name in ("x", "V", "w", "H", "trN"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
        np.testing.assert_array_equal(getattr(a, name), getattr(c, name))


def test_scaled_metric_scales_area_and_curvature(cube):
    d = conformal(cube, "0.64")
    a = sf.sample_surface(cube, 200.0, 1024)
    b = sf.sample_surface(d, 200.0, 1024)
    np.testing.assert_allclose(b.w, 0.64 * a.w, rtol=1e-12)
    np.testing.assert_allclose(b.V, a.V / 0.8, atol=1e-12)


def test_cube_faces_fixture_matches_shipped_cube(cube):
    assert scenario.load_scenario("cube").domain.faces == cube.faces
    assert len(CUBE_FACES) == 6
