import math
import time
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from omnisurface.channel import RfConstants, channel_terms
from omnisurface.geometry import PanelGeometry, Point3, directions
from omnisurface.optimizer import (
    BOUNDS,
    MODES,
    InstanceTooLarge,
    PhasorProblem,
    branch_and_bound,
    bracketing_candidates,
    brute_force,
    continuous_optimum,
    node_upper_bound,
    quantize_nearest,
    solve_bnb,
    solve_brute_force,
    solve_continuous,
    solve_nearest,
)
from omnisurface.validation import random_instance

PI = math.pi
UNIT = RfConstants(tx_power=1.0, noise_power=1.0)


def problem(amps, base, direct, s_a, ref=None):
    amps = np.asarray(amps, float)
    ref = float(np.angle(direct)) % (2 * PI) if ref is None else ref
    return PhasorProblem(amps, np.asarray(base, float), complex(direct), ref, s_a)


# --- continuous optimum ------------------------------------------------------

def test_continuous_zero_on_segment():
    p = PanelGeometry(1, 1, 0.03, 0.03)
    psi = continuous_optimum(p, (-1.0, 0, 0), (1.0, 0, 0), RfConstants())
    assert psi[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("fraction,expected", [(1.0, 0.0), (0.25, 1.5 * PI)])
def test_continuous_detour(fraction, expected):
    p = PanelGeometry(1, 1, 0.03, 0.03)
    bs, mu = (-1.0, 0.0, 0.0), (1.0, 1.0, 0.0)
    _, _, d1, d2 = directions(p, 0, bs, mu)
    detour = d1 + d2 - math.dist(bs, mu)
    rf = RfConstants(wavelength=detour / fraction)
    psi = continuous_optimum(p, bs, mu, rf)[0]
    # cyclic distance
    assert min(abs(psi - expected), 2 * PI - abs(psi - expected)) < 1e-9


# --- candidate sets ---------------------------------------------------------------

@pytest.mark.parametrize(
    "psi,expected", [(0.3 * PI, (0, 1)), (1.9 * PI, (3, 0)), (PI / 2, (1, 2)), (0.0, (0, 1))]
)
def test_bracketing(psi, expected):
    assert bracketing_candidates(psi, 4) == expected


@pytest.mark.parametrize("psi,expected", [(0.3 * PI, 1), (0.2 * PI, 0), (PI / 4, 0), (1.9 * PI, 0), (1.6 * PI, 3), (1.75 * PI, 0)])
def test_quantize_nearest(psi, expected):
    assert quantize_nearest(psi, 4) == expected


@settings(max_examples=300)
@given(psi=st.floats(0, 2 * PI, exclude_max=True), s_a=st.integers(1, 16))
def test_bracket_contains_target_and_nearest(psi, s_a):
    lo, hi = bracketing_candidates(psi, s_a)
    step = 2 * PI / s_a
    # offset above the low grid phase, measured cyclically
    off = (psi - lo * step) % (2 * PI)
    off = 0.0 if off > 2 * PI - 1e-12 else off
    assert off <= step + 1e-12
    assert hi == (lo + 1) % s_a
    assert quantize_nearest(psi, s_a) in (lo, hi)


# --- upper bound --------------------------------------------------------------------

def test_bound_at_root_and_leaf():
    p = problem([0.5, 0.25], [0.3, 1.1], 1 + 0j, 4)
    root = node_upper_bound(p.node([None, None]), UNIT)
    assert root == pytest.approx(math.log2(1 + (1 + 0.75) ** 2))
    leaf = p.node([1, 3])
    assert node_upper_bound(leaf, UNIT) == pytest.approx(math.log2(1 + p.objective([1, 3]) ** 2), rel=1e-15)


# --- branch and bound ----------------------------------------------------------------

def test_single_element_picks_aligned_phase():
    p = problem([0.5], [0.0], 1 + 0j, 4, ref=0.0)
    assert p.candidates("bracketing") == [(0, 1)]
    r = solve_bnb(p, UNIT, "bracketing")
    assert r.phases.indices == (0,)
    assert r.amplitude == pytest.approx(1.5)


def test_single_phase_level():
    p = problem([0.5, 0.2], [1.0, 2.0], 0.3j, 1)
    r = solve_bnb(p, UNIT, "full")
    assert r.phases.indices == (0, 0)
    assert r.amplitude == pytest.approx(p.objective([0, 0]))


def test_brute_force_leaf_count():
    p = problem([0.5, 0.2], [1.0, 2.0], 0.3j, 2)
    assert solve_brute_force(p, UNIT, "full").nodes_visited == 4
    assert solve_brute_force(p, UNIT, "bracketing").nodes_visited == 4


def test_brute_force_m8_full_under_a_second():
    inst = random_instance(np.random.default_rng(4), 8, 4)
    t0 = time.perf_counter()
    r = solve_brute_force(inst.problem, inst.rf, "full")
    assert time.perf_counter() - t0 < 1.0
    assert r.nodes_visited == 65536


def test_brute_force_guard():
    p = problem(np.ones(13), np.zeros(13), 1.0, 4)
    with pytest.raises(InstanceTooLarge):
        solve_brute_force(p, UNIT, "full")


def test_zero_amplitude_ties_pick_lowest_candidates():
    p = problem(np.zeros(40), np.linspace(0, 6, 40), 1.0, 4)
    for bound in BOUNDS:
        r = solve_bnb(p, UNIT, "full", bound=bound)
        assert r.phases.indices == (0,) * 40
        r = solve_bnb(p, UNIT, "bracketing", bound=bound)
        assert r.phases.indices == tuple(c[0] for c in p.candidates("bracketing"))


def test_exact_symmetric_tie_resolved_lexicographically():
    # each element alone: both candidates equally far from the direct phase
    step = PI / 2
    p = problem([1.0, 1.0], [step / 2, step / 2], 1.0, 4, ref=0.0)
    bf = solve_brute_force(p, UNIT, "full")
    for bound in BOUNDS:
        assert solve_bnb(p, UNIT, "full", bound=bound).phases == bf.phases
    assert bf.phases.indices == (0, 0)


def test_symmetric_geometry_matches_oracle():
    panel = PanelGeometry(3, 3, 0.03, 0.03, Point3(0, 0, 2))
    bs, mu = Point3(-4.0, 0.0, 2.0), Point3(1.5, 0.0, 2.0)  # on the normal axis
    rf = RfConstants(direct_blocked=True)
    for mode in MODES:
        bf = brute_force(panel, bs, mu, rf, mode)
        for bound in BOUNDS:
            r = branch_and_bound(panel, bs, mu, rf, mode, bound=bound)
            assert r.phases == bf.phases and r.se == bf.se


def test_random_init_reaches_same_optimum():
    inst = random_instance(np.random.default_rng(9), 7, 4)
    a = solve_bnb(inst.problem, inst.rf, "full")
    b = solve_bnb(inst.problem, inst.rf, "full", init="random", rng=np.random.default_rng(1))
    assert a.phases == b.phases
    with pytest.raises(ValueError):
        solve_bnb(inst.problem, inst.rf, "full", init="random")


def test_unknown_options_rejected():
    p = problem([0.5], [0.0], 1.0, 4)
    with pytest.raises(ValueError):
        solve_bnb(p, UNIT, "nearby")
    with pytest.raises(ValueError):
        solve_bnb(p, UNIT, bound="loose")


def test_large_panel_is_fast_with_angular_bound():
    inst = random_instance(np.random.default_rng(5), 100, 4)
    t0 = time.perf_counter()
    r = solve_bnb(inst.problem, inst.rf, "bracketing", bound="angular")
    assert time.perf_counter() - t0 < 2.0
    assert r.se >= solve_nearest(inst.problem, inst.rf).se


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 12), s_a=st.sampled_from([2, 4, 8]))
def test_bnb_equals_brute_force(seed, m, s_a):
    inst = random_instance(np.random.default_rng(seed), m, s_a)
    p = inst.problem
    for mode in MODES:
        try:
            bf = solve_brute_force(p, inst.rf, mode)
        except InstanceTooLarge:
            continue
        for bound in BOUNDS:
            r = solve_bnb(p, inst.rf, mode, bound=bound)
            assert r.phases == bf.phases
            assert r.se == pytest.approx(bf.se, rel=1e-12)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 8))
def test_solution_ordering(seed, m):
    inst = random_instance(np.random.default_rng(seed), m, 4)
    p = inst.problem
    tol = 1e-12 * (abs(p.direct) + p.amplitude.sum())
    cont = solve_continuous(p, inst.rf).amplitude
    full = solve_bnb(p, inst.rf, "full", bound="angular").amplitude
    brk = solve_bnb(p, inst.rf, "bracketing", bound="angular").amplitude
    near = solve_nearest(p, inst.rf).amplitude
    assert cont + tol >= full
    assert full + tol >= brk
    assert brk + tol >= near
    finer = solve_bnb(replace(p, s_a=8), inst.rf, "full", bound="angular").amplitude
    assert finer + tol >= full


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 8))
def test_bound_admissible_on_random_nodes(seed, m):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, m, 4)
    p = inst.problem
    cands = p.candidates("bracketing")
    fixed = [int(rng.choice(c)) if rng.random() < 0.5 else None for c in cands]
    ub = node_upper_bound(p.node(fixed), inst.rf)
    free = [e for e, f in enumerate(fixed) if f is None]
    best = 0.0
    for combo in np.ndindex(*(2 for _ in free)):
        idx = list(fixed)
        for e, k in zip(free, combo):
            idx[e] = cands[e][min(k, len(cands[e]) - 1)]
        best = max(best, p.objective(idx))
    assert ub >= math.log2(1 + inst.rf.tx_power * best**2 / inst.rf.noise_power) * (1 - 1e-12)


def test_cophasing_at_continuous_optimum():
    panel = PanelGeometry(4, 4, 0.03, 0.03, Point3(0, 0, 2))
    bs, mu = Point3(-30.0, 2.0, 3.0), Point3(0.8, -0.4, 1.7)
    rf = RfConstants(kappa=math.inf)
    terms = channel_terms(panel, bs, mu, rf)
    psi = continuous_optimum(panel, bs, mu, rf)
    diff = np.angle(terms.element_los(psi) * np.conj(terms.direct_los))
    assert np.abs(diff).max() < 1e-9
