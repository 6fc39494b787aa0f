import math

import numpy as np
import pytest

from qmanifold.dpgeom import (
    DpChart,
    approx_error_profile,
    circle_length,
    dp_polar_field,
    two_level_gap,
    two_level_map,
    two_level_metric,
)
from qmanifold.errors import DegenerateGroundStateError
from qmanifold.geometry import geometric_tensor
from qmanifold.model import LmgModel, TwoLevelModel
from qmanifold.spectrum import dp_refine, dp_seeds, energy_gap


@pytest.fixture(scope="module")
def dp10():
    return dp_refine(LmgModel(10), dp_seeds(10)[0])


@pytest.mark.parametrize("N", [5, 10])
def test_two_level_vector_vanishes_at_every_dp(N):
    m = LmgModel(N)
    for seed in dp_seeds(N):
        dp = dp_refine(m, seed)
        cxyz = two_level_map(m, dp, (0.0, 0.0))
        assert np.abs(cxyz[1:]).max() < 1e-9
        assert cxyz[0] == pytest.approx(dp.energy, abs=1e-10)


def test_lmg_two_level_y_vanishes(dp10):
    rng = np.random.default_rng(3)
    for d in rng.uniform(-0.2, 0.2, (10, 2)):
        assert two_level_map(10, dp10, d)[2] == 0.0


def test_taylor_form_equals_exact_projection(dp10):
    d = np.array([0.05, -0.08])
    exact = two_level_map(10, dp10, d)
    taylor = two_level_map(10, dp10, d, taylor_order=2)
    np.testing.assert_allclose(taylor, exact, atol=1e-12)


def test_two_level_gap_ratio_tends_to_one(dp10):
    m = LmgModel(10)
    devs = []
    for R in (1e-2, 1e-3, 1e-4):
        d = R * np.array([0.6, 0.8])
        devs.append(abs(two_level_gap(m, dp10, d) / energy_gap(m, dp10.point + d) - 1))
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-3


def test_plane_family_metric_by_hand():
    g = two_level_metric(TwoLevelModel.plane(), (0.0, 0.0), (0.1, 0.0))
    np.testing.assert_allclose(g, [[0.0, 0.0], [0.0, 25.0]], atol=1e-6)


def test_plane_family_rejects_origin():
    with pytest.raises(DegenerateGroundStateError):
        two_level_metric(TwoLevelModel.plane(), (0.0, 0.0), (0.0, 0.0))


@pytest.mark.parametrize("R", [0.01, 0.3, 2.0])
def test_two_level_circle_is_pi(R):
    res = circle_length(TwoLevelModel.plane(), (0.0, 0.0), R)
    assert res.length == pytest.approx(math.pi, abs=1e-6)


def test_lmg_approx_metric_rank_one_exact_regular(dp10):
    m = LmgModel(10)
    chart = DpChart.from_dp(m, dp10)
    for R in (1e-2, 1e-3, 1e-4):
        d = R * np.array([math.cos(0.9), math.sin(0.9)])
        g = chart.metric(d)
        assert np.allclose(g, g.T, atol=0)
        assert np.linalg.eigvalsh(g).min() >= -1e-9 * np.trace(g)
        assert abs(np.linalg.det(g)) < 1e-9 * np.trace(g) ** 2
        assert np.linalg.det(geometric_tensor(m, dp10.point + d).metric) > 0


def test_gauge_rotation_invariance(dp10):
    chart = DpChart.from_dp(10, dp10)
    rot = chart.rotated(0.7)
    d = np.array([0.03, -0.02])
    assert not np.allclose(chart.bloch(d), rot.bloch(d))
    assert np.linalg.norm(rot.bloch(d)) == pytest.approx(np.linalg.norm(chart.bloch(d)), rel=1e-12)
    np.testing.assert_allclose(rot.metric(d), chart.metric(d), rtol=1e-8, atol=1e-8)
    a = approx_error_profile(10, chart, math.pi / 4, [0.1, 0.05])
    b = approx_error_profile(10, rot, math.pi / 4, [0.1, 0.05])
    np.testing.assert_allclose(a.errors, b.errors, rtol=1e-8)
    c1 = circle_length(10, chart, 0.05)
    c2 = circle_length(10, rot, 0.05)
    assert c1.length == pytest.approx(c2.length, abs=1e-8)


def test_approx_error_converges_close_to_dp(dp10):
    prof = approx_error_profile(10, dp10, math.pi / 4, [1e-3, 1e-4, 1e-5])
    assert np.all(np.diff(prof.errors, axis=0) < 0)
    assert np.nanmax(prof.errors[-1]) < 1e-2


def test_approx_error_trust_radius_flag(dp10):
    prof = approx_error_profile(10, dp10, math.pi / 4, [0.1, 0.35])
    assert list(prof.outside_trust) == [False, True]


def test_approx_error_flags_vanishing_component():
    # the plane family's exact metric has a zero off-diagonal entry on the axis
    prof = approx_error_profile(TwoLevelModel.plane(), (0.0, 0.0), 0.0, [0.1])
    assert prof.undefined[0, 1]
    assert math.isnan(prof.errors[0, 1])


def test_polar_chart_regularizes_divergence(dp10):
    m = LmgModel(10)
    th = 0.0
    d = np.array([math.cos(th), math.sin(th)])
    cart = [np.abs(geometric_tensor(m, dp10.point + R * d).metric).max() for R in (1e-3, 1e-4)]
    polar = [np.abs(dp_polar_field(m, dp10, R, th).metric).max() for R in (1e-3, 1e-4)]
    assert cart[1] / cart[0] > 50
    assert polar[1] / polar[0] < 1.1


def test_polar_ricci_matches_cartesian(dp10):
    from qmanifold.geometry import ricci_scalar

    m = LmgModel(10)
    R, th = 0.1, 0.5
    f = dp_polar_field(m, dp10, R, th)
    lam = dp10.point + R * np.array([math.cos(th), math.sin(th)])
    assert f.ricci == pytest.approx(ricci_scalar(m, lam), abs=1e-3)


def test_ricci_limit_depends_on_direction(dp10):
    m = LmgModel(10)
    thetas = (0.0, 0.8, 1.6, 2.4)
    near = np.array([dp_polar_field(m, dp10, 1e-4, t).ricci for t in thetas])
    nearer = np.array([dp_polar_field(m, dp10, 1e-3, t).ricci for t in thetas])
    spread = near.max() - near.min()
    assert spread > 50
    assert np.abs(near - nearer).max() < 0.25 * spread


def test_polar_field_refuses_collapsed_region():
    m = LmgModel(5)
    dp = dp_refine(m, (dp_seeds(5)[0].point.kappa + 1e-3, dp_seeds(5)[0].point.chi))
    assert dp.displacement > 0
    with pytest.raises(ValueError):
        dp_polar_field(m, dp, 5 * dp.displacement, 0.3)
    with pytest.raises(ValueError):
        dp_polar_field(m, dp, 0.0, 0.3)
