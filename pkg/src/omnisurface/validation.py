"""Randomised oracle and invariant checks shared by ``validate`` and the tests."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .channel import RfConstants, channel_terms, small_scale, spectral_efficiency
from .geometry import PanelGeometry, Point3
from .optimizer import (
    BOUNDS,
    BRUTE_FORCE_MAX_LEAVES,
    MODES,
    PhasorProblem,
    continuous_optimum,
    node_upper_bound,
    solve_brute_force,
    solve_bnb,
    solve_continuous,
    solve_nearest,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CheckResult:
    check: str
    passed: bool
    value: float
    detail: str
    seconds: float = 0.0


@dataclass(frozen=True)
class RandomInstance:
    panel: PanelGeometry
    bs: Point3
    mu: Point3
    rf: RfConstants

    @property
    def problem(self) -> PhasorProblem:
        return PhasorProblem.from_scenario(self.panel, self.bs, self.mu, self.rf)


def random_instance(
    rng: np.random.Generator,
    m: int,
    s_a: int,
    kappa: float | None = None,
    blocked_prob: float = 0.2,
) -> RandomInstance:
    """Small panel with BS and MU close enough that the surface matters."""
    divisors = [r for r in range(1, m + 1) if m % r == 0]
    rows = int(rng.choice(divisors))
    pitch = float(rng.uniform(0.01, 0.06))
    n_diodes = max(1, math.ceil(math.log2(s_a))) if s_a > 1 else 0
    panel = PanelGeometry(rows, m // rows, pitch, pitch, Point3(0.0, 0.0, 0.0),
                          n_diodes=n_diodes, s_a=s_a)
    bs = Point3(-float(rng.uniform(0.5, 30.0)), float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)))
    x = float(rng.uniform(0.05, 3.0)) * (1 if rng.random() < 0.5 else -1)
    mu = Point3(x, float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)))
    if kappa is None:
        kappa = float(rng.choice([0.0, 1.0, 4.0, 10.0, math.inf]))
    rf = RfConstants(
        wavelength=float(rng.uniform(0.03, 0.12)),
        kappa=kappa,
        epsilon=float(rng.uniform(0.0, 1.5)),
        alpha=float(rng.uniform(2.0, 4.0)),
        direct_blocked=bool(rng.random() < blocked_prob),
    )
    return RandomInstance(panel, bs, mu, rf)


def _timed(name: str, fn: Callable[[], tuple[bool, float, str]]) -> CheckResult:
    t0 = time.perf_counter()
    passed, value, detail = fn()
    return CheckResult(name, bool(passed), float(value), detail, time.perf_counter() - t0)


def oracle_equivalence(n: int, seed: int, m_max: int = 10, s_as=(2, 4, 8),
                       bounds=BOUNDS) -> CheckResult:
    """B&B vs exhaustive enumeration, both candidate modes.

    Full-mode instances above the brute-force leaf limit are skipped and counted.
    """

    def run():
        rng = np.random.default_rng(seed)
        mismatches, skipped, compared = [], 0, 0
        for i in range(n):
            m = int(rng.integers(1, m_max + 1))
            s_a = int(rng.choice(s_as))
            inst = random_instance(rng, m, s_a)
            problem = inst.problem
            for mode in MODES:
                if mode == "full" and s_a**m > BRUTE_FORCE_MAX_LEAVES:
                    skipped += 1
                    continue
                oracle = solve_brute_force(problem, inst.rf, mode)
                for bound in bounds:
                    got = solve_bnb(problem, inst.rf, mode, bound=bound)
                    compared += 1
                    rel = abs(got.se - oracle.se) / max(oracle.se, 1e-300)
                    if rel > 1e-12 or got.phases != oracle.phases:
                        mismatches.append((i, mode, bound))
        detail = f"{compared} comparisons, {len(mismatches)} mismatches, {skipped} full-mode skipped (guard)"
        if mismatches:
            detail += f"; first: {mismatches[:3]}"
        return not mismatches, len(mismatches), detail

    return _timed("oracle_equivalence", run)


def cophasing(n_geom: int, n_random: int, seed: int) -> CheckResult:
    """Continuous optimum aligns every element with the direct path and beats random phases."""

    def run():
        rng = np.random.default_rng(seed)
        worst, dominated = 0.0, 0
        for _ in range(n_geom):
            inst = random_instance(rng, int(rng.integers(1, 26)), 4, kappa=math.inf, blocked_prob=0.0)
            terms = channel_terms(inst.panel, inst.bs, inst.mu, inst.rf)
            psi = continuous_optimum(inst.panel, inst.bs, inst.mu, inst.rf)
            los = terms.element_los(psi)
            live = terms.los_amplitude > 0
            diff = np.angle(los[live] * np.conj(terms.direct_los))
            if live.any():
                worst = max(worst, float(np.abs(diff).max()))
            best = abs(terms.los_sum(psi))
            rand = rng.uniform(0.0, TWO_PI, size=(n_random, terms.n_elements))
            sums = np.abs(terms.direct_los + (terms.los_amplitude * np.exp(1j * (terms.base_phase - rand))).sum(axis=1))
            if np.any(sums >= best) and terms.los_amplitude.any():
                dominated += 1
        ok = worst <= 1e-9 and dominated == 0
        return ok, worst, f"max phase misalignment {worst:.3e} rad; {dominated} geometries not strictly dominant"

    return _timed("cophasing", run)


def _best_completion(problem: PhasorProblem, fixed, cands) -> float:
    free = [e for e, f in enumerate(fixed) if f is None]
    best = -1.0
    for combo in itertools.product(*(cands[e] for e in free)):
        idx = list(fixed)
        for e, c in zip(free, combo):
            idx[e] = c
        best = max(best, problem.objective(idx))
    return best


def bound_admissibility(n: int, seed: int, m_max: int = 10) -> CheckResult:
    """Relaxation bound never undercuts the best completion and is tight at leaves."""

    def run():
        rng = np.random.default_rng(seed)
        violations, leaf_mismatch, leaves = 0, 0, 0
        worst_gap = math.inf
        for _ in range(n):
            m = int(rng.integers(1, m_max + 1))
            s_a = int(rng.choice([2, 4, 8]))
            inst = random_instance(rng, m, s_a)
            problem = inst.problem
            mode = str(rng.choice(MODES))
            cands = problem.candidates(mode)
            # keep the enumeration under 2**16 completions
            fixed = [None] * m
            for e in rng.permutation(m):
                free = [len(cands[k]) for k in range(m) if fixed[k] is None]
                if math.prod(free) <= 2**16 and rng.random() < 0.5:
                    break
                fixed[e] = int(rng.choice(cands[e]))
            node = problem.node(fixed)
            ub = node_upper_bound(node, inst.rf)
            best = _best_completion(problem, fixed, cands)
            best_se = float(spectral_efficiency(best, inst.rf))
            worst_gap = min(worst_gap, ub - best_se)
            if ub < best_se * (1.0 - 1e-12):
                violations += 1
            if all(f is not None for f in fixed):
                leaves += 1
                if ub != best_se:
                    leaf_mismatch += 1
        detail = f"{violations} violations, {leaf_mismatch}/{leaves} leaf mismatches, min gap {worst_gap:.3e}"
        return violations == 0 and leaf_mismatch == 0, violations + leaf_mismatch, detail

    return _timed("bound_admissibility", run)


def moment_check(n_scen: int, n_draws: int, seed: int, rtol: float = 0.02) -> CheckResult:
    """Closed-form E|h|^2 against the empirical mean of sampled composite channels."""

    def run():
        rng = np.random.default_rng(seed)
        kappas = (0.0, 1.0, 4.0, 10.0)
        worst = 0.0
        for i in range(n_scen):
            inst = random_instance(rng, int(rng.integers(1, 11)), 4, kappa=kappas[i % 4], blocked_prob=0.0)
            # NLoS comparable to LoS so both halves of the moment matter
            inst = replace(inst, rf=replace(inst.rf, nlos_ref_gain=float(rng.uniform(1e-4, 1e-1))))
            terms = channel_terms(inst.panel, inst.bs, inst.mu, inst.rf)
            psi = rng.uniform(0.0, TWO_PI, terms.n_elements)
            ss = small_scale(rng, (n_draws, terms.n_elements + 1))
            empirical = float(np.mean(np.abs(terms.draw(psi, ss)) ** 2))
            expected = terms.expected_power(psi)
            worst = max(worst, abs(empirical - expected) / expected)
        return worst <= rtol, worst, f"max relative error {worst:.4f} (tolerance {rtol})"

    return _timed("moment_check", run)


def bracketing_audit(n: int, seed: int, m_max: int = 8) -> CheckResult:
    """How often the bracketing candidate set misses the full-set optimum."""

    def run():
        rng = np.random.default_rng(seed)
        worse = violations = 0
        for _ in range(n):
            inst = random_instance(rng, int(rng.integers(1, m_max + 1)), 4)
            problem = inst.problem
            full = solve_bnb(problem, inst.rf, "full", bound="angular")
            brk = solve_bnb(problem, inst.rf, "bracketing", bound="angular")
            if full.amplitude < brk.amplitude * (1.0 - 1e-12):
                violations += 1
            if brk.amplitude < full.amplitude * (1.0 - 1e-12):
                worse += 1
        rate = worse / n
        return violations == 0, rate, f"bracketing below full in {worse}/{n} instances (rate {rate:.4f})"

    return _timed("bracketing_audit", run)


def ordering(n: int, seed: int, m_max: int = 8) -> CheckResult:
    """continuous >= full >= bracketing >= nearest, and doubling S_a never hurts."""

    def run():
        rng = np.random.default_rng(seed)
        bad = 0
        for _ in range(n):
            m = int(rng.integers(1, m_max + 1))
            s_a = int(rng.choice([2, 4]))
            inst = random_instance(rng, m, s_a)
            p = inst.problem
            amps = [
                solve_continuous(p, inst.rf).amplitude,
                solve_bnb(p, inst.rf, "full", bound="angular").amplitude,
                solve_bnb(p, inst.rf, "bracketing", bound="angular").amplitude,
                solve_nearest(p, inst.rf).amplitude,
            ]
            p2 = replace(p, s_a=2 * s_a)
            finer = solve_bnb(p2, inst.rf, "full", bound="angular").amplitude
            tol = 1e-12 * (abs(p.direct) + float(p.amplitude.sum()))
            if any(a + tol < b for a, b in zip(amps, amps[1:])) or finer + tol < amps[1]:
                bad += 1
        return bad == 0, bad, f"{bad}/{n} instances violate the ordering"

    return _timed("ordering", run)


def run_suite(quick: bool = False, seed: int = 0) -> list[CheckResult]:
    if quick:
        return [
            oracle_equivalence(150, seed, m_max=8),
            cophasing(20, 2000, seed + 1),
            bound_admissibility(60, seed + 2, m_max=8),
            moment_check(8, 20000, seed + 3, rtol=0.05),
            bracketing_audit(200, seed + 4),
            ordering(100, seed + 5),
        ]
    return [
        oracle_equivalence(1000, seed),
        cophasing(100, 10_000, seed + 1),
        bound_admissibility(200, seed + 2),
        moment_check(20, 100_000, seed + 3),
        bracketing_audit(1000, seed + 4),
        ordering(300, seed + 5),
    ]
