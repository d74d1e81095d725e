import math
from dataclasses import replace

import numpy as np
import pytest

from omnisurface.channel import RfConstants
from omnisurface.experiments import (
    MuRegion,
    Scenario,
    SweepPoint,
    evaluate_trial,
    grid_axis,
    heatmap,
    heatmap_cell,
    run_trials,
    sample_mu,
    size_sweep,
    summarize,
    trial_rng,
)
from omnisurface.geometry import GeometryError, PanelGeometry, Point3, Side


@pytest.fixture
def scenario():
    panel = PanelGeometry(3, 3, 0.03, 0.03, Point3(0.0, 0.0, 2.0))
    return Scenario(panel)


def test_sample_mu_stays_in_disk():
    region = MuRegion(Point3(1.0, -1.0, 0.0), 2.0, 1.5)
    rng = np.random.default_rng(0)
    pts = np.array([sample_mu(region, rng).as_array() for _ in range(10_000)])
    r = np.hypot(pts[:, 0] - 1.0, pts[:, 1] + 1.0)
    assert r.max() <= 2.0
    assert np.all(pts[:, 2] == 1.5)
    # uniform disk: per-axis std is R/2
    sigma = 2.0 / 2 / math.sqrt(len(pts))
    assert abs(pts[:, 0].mean() - 1.0) < 3 * sigma
    assert abs(pts[:, 1].mean() + 1.0) < 3 * sigma
    # area uniformity: half the samples inside radius R/sqrt(2)
    assert abs(np.mean(r < 2.0 / math.sqrt(2)) - 0.5) < 3 * 0.5 / math.sqrt(len(pts))


def test_sample_mu_splits_evenly_across_panel(scenario):
    rng = np.random.default_rng(1)
    n = 10_000
    pts = [sample_mu(scenario.region, rng, scenario.panel) for _ in range(n)]
    front = sum(scenario.panel.signed_distance(p) > 0 for p in pts)
    assert abs(front - n / 2) < 3 * math.sqrt(n) / 2
    assert min(abs(scenario.panel.signed_distance(p)) for p in pts) >= 0.01


def test_region_validation():
    with pytest.raises(ValueError):
        MuRegion(radius=0.0)


def test_scenario_rejects_bs_behind_panel(scenario):
    with pytest.raises(GeometryError):
        replace(scenario, bs=Point3(5.0, 0.0, 2.0))


def test_reflective_trial_irs_equals_ios(scenario):
    t = evaluate_trial(scenario, Point3(-1.0, 0.4, 2.0), trial_rng(0, 0))
    assert t.side is Side.REFLECTIVE
    assert t.se_ios == t.se_irs
    assert len(t.phases) == 9


def test_transmissive_trial_irs_equals_direct(scenario):
    t = evaluate_trial(scenario, Point3(1.0, 0.4, 2.0), trial_rng(0, 1))
    assert t.side is Side.TRANSMISSIVE
    assert t.se_irs == t.se_direct
    assert t.se_irs_los == t.se_direct_los


def test_trials_are_sandwiched_on_los_objective(scenario):
    for t in run_trials(scenario, 40, master_seed=3):
        assert t.se_direct_los <= t.se_irs_los <= t.se_ios_los
        assert min(t.se_ios, t.se_irs, t.se_direct) >= 0


def test_trials_depend_only_on_seed_and_index(scenario):
    a = run_trials(scenario, 5, master_seed=7)
    g = trial_rng(7, 3)
    b = evaluate_trial(scenario, sample_mu(scenario.region, g, scenario.panel), g)
    assert a[3] == b
    c = run_trials(scenario, 5, master_seed=8)
    assert a[0].mu_position != c[0].mu_position


def test_random_init_trials_run(scenario):
    sc = replace(scenario, init_mode="random")
    t = run_trials(sc, 3, 0)
    ref = run_trials(scenario, 3, 0)
    # the optimum does not depend on the starting point
    assert [x.phases for x in t] == [x.phases for x in ref]


def test_summarize_statistics():
    trials = [
        type("T", (), {"se_ios": v, "se_irs": v / 2, "se_direct": 1.0})() for v in (1.0, 2.0, 3.0, 4.0)
    ]
    p = summarize(9, trials)
    assert p.avg_se["ios"] == 2.5 and p.avg_se["direct"] == 1.0
    assert p.std_err["ios"] == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert p.std_err["direct"] == 0.0
    assert p.n_trials == 4


def test_improvement_readings():
    p = SweepPoint(4, {"ios": 4.0, "irs": 2.0, "direct": 1.0}, {}, 1)
    assert p.improvement("ios") == pytest.approx((4.0, 15.0), rel=1e-14)
    assert p.improvement("irs") == pytest.approx((2.0, 3.0), rel=1e-14)


def test_size_sweep_deterministic(scenario):
    a = size_sweep(scenario, [1, 2, 3], 30, master_seed=5)
    b = size_sweep(scenario, [1, 2, 3], 30, master_seed=5)
    assert a == b
    assert [p.m_elements for p in a] == [1, 4, 9]
    # direct-only is the same population at every size
    assert a[0].avg_se["direct"] == a[2].avg_se["direct"]
    with pytest.raises(ValueError):
        size_sweep(scenario, [0], 1, 0)
    with pytest.raises(ValueError):
        size_sweep(scenario, [1], 0, 0)


def test_grid_axis():
    xs = grid_axis(-2.0, 2.0, 0.1)
    assert len(xs) == 41 and xs[0] == -2.0 and xs[-1] == 2.0 and xs[20] == 0.0
    with pytest.raises(ValueError):
        grid_axis(0.0, 1.0, 0.0)


def test_heatmap_structure(scenario):
    xs = grid_axis(-1.0, 1.0, 0.5)
    cells = heatmap(scenario, xs, xs)
    # x = 0 is the panel plane
    assert len(cells) == 5 * 4
    assert all(c.x != 0.0 for c in cells)
    keys = [(c.y, c.x) for c in cells]
    assert keys == sorted(keys)
    for c in cells:
        if c.side is Side.TRANSMISSIVE:
            assert c.se_irs == c.se_direct
        else:
            assert c.se_irs == c.se_ios
        assert c.se_ios >= c.se_direct


def test_heatmap_rejects_random_init(scenario):
    with pytest.raises(ValueError):
        heatmap(replace(scenario, init_mode="random"), [1.0], [0.0])


def test_heatmap_mirror_symmetry_with_unit_epsilon():
    # BS far away and on the normal axis: mirror points see the same angles
    panel = PanelGeometry(4, 4, 0.03, 0.03, Point3(0.0, 0.0, 2.0))
    sc = Scenario(panel, RfConstants(direct_blocked=True), bs=Point3(-500.0, 0.0, 2.0))
    for x, y in [(0.5, 0.3), (1.2, -0.9), (1.9, 0.0)]:
        front = heatmap_cell(sc, -x, y)
        back = heatmap_cell(sc, x, y)
        assert front.se_ios == pytest.approx(back.se_ios, rel=1e-3)


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_closer_to_center_is_better(sign):
    panel = PanelGeometry(10, 10, 0.03, 0.03, Point3(0.0, 0.0, 2.0))
    sc = Scenario(panel)
    assert heatmap_cell(sc, sign * 0.5, 0.0).se_ios > heatmap_cell(sc, sign * 1.9, 0.0).se_ios
