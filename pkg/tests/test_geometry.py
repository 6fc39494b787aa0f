import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmanifold.errors import DegenerateGroundStateError, MetricDegenerateError
from qmanifold.geometry import (
    FamilyMetric,
    FunctionMetric,
    LinearMap,
    PolarMap,
    SmoothingMap,
    christoffel,
    fidelity_distance,
    geometric_tensor,
    metric_derivatives,
    metric_field,
    metric_from_overlaps,
    metric_gradient_batch,
    pullback_metric,
    ricci_scalar,
)
from qmanifold.meanfield import condensate_metric
from qmanifold.model import LmgModel, TwoLevelModel
from qmanifold.spectrum import dp_refine, dp_seeds, spectrum

kappas = st.floats(min_value=-7, max_value=3, allow_nan=False)
chis = st.floats(min_value=-2, max_value=2, allow_nan=False)


def sphere_metric(p):
    return np.diag([0.25, 0.25 * math.sin(p[0]) ** 2])


def bloch_plane_family():
    """Complex two-level family n = (u, v, 1): a nonredundant chart of the upper hemisphere."""
    return TwoLevelModel(lambda p: (0.0, p[0], p[1], 1.0), jacobian=lambda p: [[0, 0], [1, 0], [0, 1], [0, 0]])


# --------------------------------------------------------------------------
# geometric tensor
# --------------------------------------------------------------------------


@pytest.mark.parametrize("N", [4, 10, 50])
def test_origin_metric_closed_form(N):
    g = geometric_tensor(LmgModel(N), (0.0, 0.0)).metric
    assert g[0, 0] == pytest.approx((N - 1) / (32 * N), abs=1e-10)
    assert g[1, 1] == pytest.approx(1 / (4 * N), abs=1e-10)
    assert abs(g[0, 1]) < 1e-10


def test_sphere_chart_metric():
    m = TwoLevelModel.sphere()
    for th, ph in [(0.4, 0.1), (1.2, 2.0), (2.5, -1.0)]:
        g = geometric_tensor(m, (th, ph)).metric
        np.testing.assert_allclose(g, sphere_metric((th, ph)), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(kappa=kappas, chi=chis)
def test_lmg_tensor_invariants(kappa, chi):
    m = LmgModel(8)
    try:
        t = geometric_tensor(m, (kappa, chi))
    except DegenerateGroundStateError:
        return
    np.testing.assert_allclose(t.G, np.conj(t.G.T), atol=1e-12 * max(1.0, np.abs(t.G).max()))
    assert np.all(t.berry == 0.0)
    assert np.linalg.eigvalsh(t.metric).min() >= -1e-10 * max(1.0, np.abs(t.metric).max())


@settings(max_examples=25, deadline=None)
@given(kappa=kappas, chi=st.floats(min_value=0.01, max_value=2))
def test_lmg_metric_mirror_parity(kappa, chi):
    m = LmgModel(8)
    try:
        a = geometric_tensor(m, (kappa, chi)).metric
        b = geometric_tensor(m, (kappa, -chi)).metric
    except DegenerateGroundStateError:
        return
    scale = max(1.0, np.abs(a).max())
    assert abs(a[0, 0] - b[0, 0]) < 1e-10 * scale
    assert abs(a[1, 1] - b[1, 1]) < 1e-10 * scale
    assert abs(a[0, 1] + b[0, 1]) < 1e-10 * scale


def test_degenerate_ground_state_raises():
    dp = dp_refine(LmgModel(5), dp_seeds(5)[0])
    with pytest.raises(DegenerateGroundStateError):
        geometric_tensor(LmgModel(5), dp.point)


def test_berry_curvature_sign_matches_plaquette_phase():
    # Berry phase of a small counterclockwise loop = integral of F over the enclosed area
    m = TwoLevelModel.sphere()
    th, ph, h = 1.0, 0.3, 1e-3
    F = geometric_tensor(m, (th, ph)).berry
    corners = [(th - h, ph - h), (th + h, ph - h), (th + h, ph + h), (th - h, ph + h)]
    states = [spectrum(m, c).ground for c in corners]
    loop = np.prod([np.vdot(states[i], states[(i + 1) % 4]) for i in range(4)])
    gamma = -np.angle(loop)
    assert F[0, 1] == pytest.approx(gamma / (2 * h) ** 2, rel=1e-4)
    assert abs(F[0, 1]) == pytest.approx(0.5 * math.sin(th), rel=1e-6)
    assert F[1, 0] == pytest.approx(-F[0, 1], rel=1e-14)


# --------------------------------------------------------------------------
# overlap metric
# --------------------------------------------------------------------------


def test_fidelity_distance_limits():
    a = np.array([1.0, 0.0])
    assert fidelity_distance(a, a) == 0.0
    assert fidelity_distance(a, np.array([0.0, 1.0])) == 1.0


def test_overlap_metric_matches_perturbation_sum():
    rng = np.random.default_rng(7)
    m = LmgModel(10)
    checked = 0
    while checked < 5:
        lam = rng.uniform([-3, -2], [3, 2])
        t = geometric_tensor(m, lam)
        if t.gap <= 0.05:
            continue
        g = metric_from_overlaps(m, lam, 1e-5)
        assert np.linalg.norm(g - t.metric) / np.linalg.norm(t.metric) < 1e-4
        checked += 1


def test_overlap_metric_warns_across_crossing():
    dp = dp_refine(LmgModel(5), dp_seeds(5)[0])
    lam = dp.point + np.array([2e-6, 0.0])
    with pytest.warns(RuntimeWarning):
        metric_from_overlaps(LmgModel(5), lam, 1e-5)


# --------------------------------------------------------------------------
# derivatives, connection, curvature
# --------------------------------------------------------------------------


def test_constant_metric_has_zero_derivatives_and_connection():
    src = FunctionMetric(lambda p: np.array([[2.0, 0.3], [0.3, 1.0]]))
    md = metric_derivatives(src, (0.4, -0.2))
    assert np.abs(md.first).max() < 1e-9
    assert np.abs(md.second).max() < 1e-9
    assert np.abs(christoffel(src, (0.4, -0.2))).max() < 1e-9
    assert abs(ricci_scalar(src, (0.4, -0.2))) < 1e-6


def test_sphere_metric_derivative_and_christoffel():
    src = FunctionMetric(sphere_metric)
    th = math.pi / 4
    md = metric_derivatives(src, (th, 0.3), richardson=True)
    assert md.first[0, 1, 1] == pytest.approx(math.sin(th) * math.cos(th) / 2, abs=1e-9)
    G = christoffel(src, (th, 0.3))
    assert G[0, 1, 1] == pytest.approx(-0.5, abs=1e-8)
    assert G[1, 0, 1] == pytest.approx(math.cos(th) / math.sin(th), abs=1e-8)
    np.testing.assert_allclose(G, np.swapaxes(G, 1, 2), atol=0)


def test_two_level_fd_partials_match_closed_form():
    m = TwoLevelModel.sphere()
    th, ph = 1.1, 0.7
    md = metric_derivatives(m, (th, ph), richardson=True)
    exact = np.zeros((2, 2, 2))
    exact[0, 1, 1] = 0.5 * math.sin(th) * math.cos(th)
    np.testing.assert_allclose(md.first, exact, atol=1e-6)


@pytest.mark.parametrize("lam", [(1.0, 0.2), (0.4, 2.0), (2.3, -1.0)])
def test_two_level_sphere_ricci(lam):
    assert ricci_scalar(TwoLevelModel.sphere(), lam) == pytest.approx(8.0, abs=1e-4)


@pytest.mark.parametrize("lam", [(0.3, -0.2), (1.5, 0.7)])
def test_two_level_other_chart_ricci(lam):
    assert ricci_scalar(bloch_plane_family(), lam) == pytest.approx(8.0, abs=1e-4)


def test_condensate_chart_ricci():
    src = FunctionMetric(lambda p: condensate_metric(4, p))
    assert ricci_scalar(src, (0.8, 0.4)) == pytest.approx(2.0, abs=1e-3)


def _brioschi_ricci(E, F, G, Eu, Ev, Fu, Fv, Gu, Gv, Evv, Fuv, Guu):
    """Scalar curvature 2K of a 2D metric from the Brioschi formula."""
    a = np.array([[-Evv / 2 + Fuv - Guu / 2, Eu / 2, Fu - Ev / 2],
                  [Fv - Gu / 2, E, F],
                  [Gv / 2, F, G]])
    b = np.array([[0, Ev / 2, Gu / 2], [Ev / 2, E, F], [Gu / 2, F, G]])
    return 2 * (np.linalg.det(a) - np.linalg.det(b)) / (E * G - F * F) ** 2


def test_ricci_against_brioschi_oracle():
    def metric(p):
        u, v = p
        E = 1 + u * u
        F = 0.5 * u * v
        G = 2 + math.sin(v) + 0.3 * u * u * v
        return np.array([[E, F], [F, G]])

    u, v = 0.7, -0.4
    E, F, G = 1 + u * u, 0.5 * u * v, 2 + math.sin(v) + 0.3 * u * u * v
    oracle = _brioschi_ricci(E, F, G, Eu=2 * u, Ev=0.0, Fu=0.5 * v, Fv=0.5 * u, Gu=0.6 * u * v,
                             Gv=math.cos(v) + 0.3 * u * u, Evv=0.0, Fuv=0.5, Guu=0.6 * v)
    assert ricci_scalar(FunctionMetric(metric), (u, v)) == pytest.approx(oracle, abs=1e-6)


def test_analytic_gradient_matches_fd():
    m = LmgModel(10)
    lam = np.array([-0.8, 0.45])
    _, dg = metric_gradient_batch(m, lam)
    fd = metric_derivatives(m, lam, second=False, richardson=True, analytic=False).first
    np.testing.assert_allclose(dg[0], fd, rtol=1e-6, atol=1e-9)


def test_analytic_and_fd_ricci_agree():
    m = LmgModel(10)
    lam = (0.5, 0.3)
    a = ricci_scalar(m, lam, analytic=True)
    b = ricci_scalar(m, lam, analytic=False, step=1e-3)
    assert a == pytest.approx(b, rel=1e-3)


@settings(max_examples=10, deadline=None)
@given(kappa=st.floats(min_value=-3, max_value=2), chi=st.floats(min_value=0.05, max_value=1.5))
def test_lmg_christoffel_chi_parity(kappa, chi):
    m = LmgModel(10)
    try:
        a = metric_field(m, (kappa, chi), second=False)
        b = metric_field(m, (kappa, -chi), second=False)
    except DegenerateGroundStateError:
        return
    if a.degenerate or b.degenerate:
        return
    for idx in np.ndindex(2, 2, 2):
        sign = (-1) ** sum(idx)
        assert a.christoffel[idx] == pytest.approx(sign * b.christoffel[idx], rel=1e-6, abs=1e-8)


def test_degenerate_flag_and_errors():
    src = FunctionMetric(lambda p: np.diag([1.0, 1e-12]))
    f = metric_field(src, (0.0, 0.0))
    assert f.degenerate and math.isnan(f.ricci)
    with pytest.raises(MetricDegenerateError):
        christoffel(src, (0.0, 0.0))
    ok = metric_field(FunctionMetric(lambda p: np.diag([1.0, 1e-9])), (0.0, 0.0))
    assert not ok.degenerate


def test_gaussian_curvature_is_half_ricci():
    f = metric_field(TwoLevelModel.sphere(), (1.0, 0.0))
    assert f.gaussian_curvature == pytest.approx(4.0, abs=1e-4)


@pytest.mark.parametrize("lam", [(0.5, 1.5), (-2.0, 1.0)])
def test_intensive_metric_stabilizes(lam):
    # phase II points: in phase I the metric stays O(1) and g/N decays like 1/N
    g80 = geometric_tensor(LmgModel(80), lam).metric / 80
    g160 = geometric_tensor(LmgModel(160), lam).metric / 160
    assert np.linalg.norm(g160 - g80) / np.linalg.norm(g80) < 0.05


# --------------------------------------------------------------------------
# pullbacks
# --------------------------------------------------------------------------


def test_linear_pullback_is_exact():
    A = np.array([[1.0, 0.5], [-0.3, 2.0]])
    b = np.array([0.2, 0.1])
    m = LmgModel(6)
    xi = np.array([0.1, 0.4])
    pb = pullback_metric(m, LinearMap(A, b), xi)
    g = geometric_tensor(m, A @ xi + b).metric
    np.testing.assert_allclose(pb.metric, A.T @ g @ A, atol=1e-15)


def test_smoothing_map_kills_metric():
    m = LmgModel(6)
    smap = SmoothingMap(center=0.5, a=0.1, axis=0)
    pb = pullback_metric(m, smap, (1e-3, 0.2))
    g = geometric_tensor(m, (0.5, 0.2)).metric
    assert pb.metric[0, 0] / g[0, 0] < 1e-300
    assert pb.singular_jacobian


def test_ricci_invariant_under_polar_pullback():
    m = LmgModel(8)
    center = np.array([0.2, 0.3])
    pmap = PolarMap(center, shift=0.5)
    xi = np.array([0.5 + 0.15, 0.8])
    lam, _ = pmap(xi)
    from qmanifold.geometry import PullbackMetric

    r_polar = ricci_scalar(PullbackMetric(FamilyMetric(m), pmap), xi)
    assert r_polar == pytest.approx(ricci_scalar(m, lam), abs=1e-3)


def test_polar_inverse_roundtrip():
    pmap = PolarMap((0.1, -0.2), shift=0.5)
    xi = np.array([0.8, 2.0])
    lam, _ = pmap(xi)
    np.testing.assert_allclose(pmap.inverse(lam), xi, atol=1e-14)


def test_map_hessians_match_fd():
    for cmap, xi in [(PolarMap((0.1, 0.2), 0.5), np.array([0.7, 0.4])), (SmoothingMap(0.0, 0.3, 0), np.array([0.5, 0.1]))]:
        h = 1e-6
        H = cmap.hessian(xi)
        for s in range(2):
            e = np.zeros(2)
            e[s] = h
            fd = (cmap(xi + e)[1] - cmap(xi - e)[1]) / (2 * h)
            np.testing.assert_allclose(H[:, :, s], fd, atol=1e-7)


def test_no_warning_on_regular_overlap_stencil():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        metric_from_overlaps(LmgModel(6), (0.3, 0.3))
