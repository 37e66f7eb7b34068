import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from curvlab import dsl
from curvlab import riemann as rg

X = sympy.symbols("x1:4")


def _sympy_scalar_curvature(g, coords):
    """Textbook contraction, done symbolically once per metric."""
    n = len(coords)
    ginv = g.inv()
    gam = [
        [
            [
                sum(ginv[k, l] * (sympy.diff(g[j, l], coords[i]) + sympy.diff(g[i, l], coords[j]) - sympy.diff(g[i, j], coords[l])) for l in range(n)) / 2
                for j in range(n)
            ]
            for i in range(n)
        ]
        for k in range(n)
    ]
    ric = sympy.zeros(n, n)
    for b in range(n):
        for d in range(n):
            s = 0
            for a in range(n):
                s += sympy.diff(gam[a][d][b], coords[a]) - sympy.diff(gam[a][a][b], coords[d])
                for e in range(n):
                    s += gam[a][a][e] * gam[e][d][b] - gam[a][d][e] * gam[e][a][b]
            ric[b, d] = s
    return sum(ginv[b, d] * ric[b, d] for b in range(n) for d in range(n))


def _field(rows):
    return rg.MetricField.from_strings(rows, len(rows))


def test_identity_metric_jet():
    jet = rg.metric_jet(rg.MetricField.euclidean(3), [0.3, -1.0, 2.0])
    np.testing.assert_array_equal(jet.g, np.eye(3))
    assert not jet.dg.any() and not jet.d2g.any()
    assert not rg.christoffel(jet).any()
    assert rg.scalar_curvature(rg.MetricField.euclidean(3), [1.0, 2.0, 3.0]) == 0.0


def test_christoffel_of_exponential_conformal_metric():
    field = rg.MetricField.conformal(dsl.parse("exp(2*x1)", 2), 2)
    for x in ([0.0, 0.0], [0.7, -2.0], [-1.3, 5.0]):
        gam = rg.christoffel(rg.metric_jet(field, x))
        assert gam[0, 0, 0] == pytest.approx(1.0, abs=1e-14)
        assert gam[0, 1, 1] == pytest.approx(-1.0, abs=1e-14)
        assert gam[1, 0, 1] == pytest.approx(1.0, abs=1e-14)
        assert gam[1, 1, 0] == pytest.approx(1.0, abs=1e-14)
        assert abs(gam[1, 0, 0]) < 1e-14 and abs(gam[0, 0, 1]) < 1e-14 and abs(gam[1, 1, 1]) < 1e-14


def test_christoffel_drives_geodesics():
    # For g = e^{2 x1} delta the quantity e^{2 x1} dx2/dt is conserved along geodesics.
    field = rg.MetricField.conformal(dsl.parse("exp(2*x1)", 2), 2)

    def acc(x, v):
        gam = rg.christoffel(rg.metric_jet(field, x))
        return -np.einsum("kij,i,j->k", gam, v, v)

    x, v = np.array([0.1, 0.0]), np.array([0.3, 0.8])
    c0 = np.exp(2 * x[0]) * v[1]
    h = 1e-3
    for _ in range(500):
        k1x, k1v = v, acc(x, v)
        k2x, k2v = v + h / 2 * k1v, acc(x + h / 2 * k1x, v + h / 2 * k1v)
        k3x, k3v = v + h / 2 * k2v, acc(x + h / 2 * k2x, v + h / 2 * k2v)
        k4x, k4v = v + h * k3v, acc(x + h * k3x, v + h * k3v)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    assert np.exp(2 * x[0]) * v[1] == pytest.approx(c0, rel=1e-10)


def test_stereographic_sphere_has_curvature_six(rng):
    field = rg.MetricField.conformal(dsl.parse("4/(1 + x1^2 + x2^2 + x3^2)^2", 3), 3)
    pts = rng.uniform(-2, 2, (50, 3))
    np.testing.assert_allclose(rg.scalar_curvature(field, pts), 6.0, atol=1e-6)


def test_schwarzschild_slice_is_scalar_flat(rng):
    field = rg.MetricField.conformal(dsl.parse("(1 + 1/(2*sqrt(x1^2 + x2^2 + x3^2)))^4", 3), 3)
    pts = rng.normal(size=(50, 3))
    pts *= (rng.uniform(0.8, 5.0, 50) / np.linalg.norm(pts, axis=1))[:, None]
    np.testing.assert_allclose(rg.scalar_curvature(field, pts), 0.0, atol=1e-6)


@pytest.mark.parametrize(
    "rows",
    [
        [["1 + x1^2", "0", "0"], ["exp(x2)", "0"], ["1 + x3^2/4"]],
        [["2 + sin(x2)", "0.3*x3", "0"], ["1 + x1^2", "0.1*x1*x2"], ["exp(x1/3)"]],
        [["(1 + 0.2*x1*x2)^2", "0", "0"], ["(1 + 0.2*x1*x2)^2", "0"], ["(1 + 0.2*x1*x2)^2"]],
    ],
)
def test_scalar_curvature_matches_symbolic_oracle(rows, rng):
    g = sympy.Matrix(3, 3, lambda i, j: sympy.sympify(rows[min(i, j)][abs(j - i)].replace("^", "**"), locals=dict(zip(map(str, X), X))))
    R = sympy.lambdify(X, _sympy_scalar_curvature(g, X), "numpy")
    pts = rng.uniform(-0.8, 0.8, (10, 3))
    got = rg.scalar_curvature(_field(rows), pts)
    want = np.array([float(R(*p)) for p in pts])
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-10)


def test_constant_u_has_zero_hessian_and_laplacian():
    field = _field([["2 + sin(x2)", "0.3*x3", "0"], ["1 + x1^2", "0"], ["1"]])
    jet = rg.metric_jet(field, [0.1, 0.2, 0.3])
    du, ddu = np.zeros(3), np.zeros((3, 3))
    assert not rg.hessian_g(du, ddu, jet).any()
    assert rg.laplacian_g(du, ddu, jet) == 0.0
    assert rg.laplacian_divergence(du, ddu, jet) == 0.0


spd_offsets = st.lists(st.floats(-0.3, 0.3), min_size=6, max_size=6)


@given(spd_offsets, st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_laplacian_two_paths_agree(c, x):
    rows = [
        [f"2 + {c[0]}*sin(x2)", f"{c[1]}*x3", f"{c[2]}*x1*x2"],
        [f"2 + {c[3]}*x1^2", f"{c[4]}*cos(x1)"],
        [f"2 + {c[5]}*x2*x3"],
    ]
    field = _field(rows)
    u = dsl.parse("x1^3 + x1*x2 + exp(x3/2)", 3)
    _, du, ddu = dsl.evaluate(u, x)
    jet = rg.metric_jet(field, x)
    a = rg.laplacian_g(du, ddu, jet)
    b = rg.laplacian_divergence(du, ddu, jet)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_level_set_mean_curvature_of_round_sphere(rng):
    u = dsl.parse("x1^2 + x2^2 + x3^2 - 1", 3)
    x = rng.normal(size=(20, 3))
    x /= np.linalg.norm(x, axis=1)[:, None]
    _, du, ddu = dsl.evaluate(u, x)
    jet = rg.metric_jet(rg.MetricField.euclidean(3), x)
    np.testing.assert_allclose(rg.level_set_mean_curvature(du, ddu, jet), 2.0, rtol=1e-14)


def test_conformal_rescaling_of_sphere_mean_curvature():
    # g = c^2 delta scales H by 1/c
    u = dsl.parse("x1^2 + x2^2 + x3^2 - 1", 3)
    x = np.array([0.6, 0.0, 0.8])
    _, du, ddu = dsl.evaluate(u, x)
    jet = rg.metric_jet(rg.MetricField.conformal(dsl.Num(0.64), 3), x)
    assert rg.level_set_mean_curvature(du, ddu, jet) == pytest.approx(2.0 / 0.8, rel=1e-14)


def test_non_positive_metric_is_rejected():
    field = _field([["1", "2", "0"], ["1", "0"], ["1"]])
    with pytest.raises(rg.MetricError, match="positive definite"):
        rg.metric_jet(field, [0.0, 0.0, 0.0])
