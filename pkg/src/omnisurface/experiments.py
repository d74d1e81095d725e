"""Monte Carlo coverage experiments comparing IOS, IRS and direct-only links.

The IRS baseline is the same panel with the transmissive branch switched off.
All three systems in a trial share one set of small-scale draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from .channel import (
    ChannelTerms,
    PhaseShiftVector,
    RfConstants,
    channel_terms,
    se_from_power,
    small_scale,
    spectral_efficiency,
)
from .geometry import GeometryError, PanelGeometry, Point3, PointLike, Side, check_bs_side, side_of
from .optimizer import OptimizationResult, PhasorProblem, solve_bnb

SYSTEMS = ("ios", "irs", "direct")
PLANE_GUARD = 0.01


@dataclass(frozen=True)
class MuRegion:
    """Disk of user positions at a fixed height."""

    center: Point3 = field(default_factory=lambda: Point3(0.0, 0.0, 2.0))
    radius: float = 2.0
    height: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "center", Point3.of(self.center))
        if not self.radius > 0:
            raise ValueError(f"region radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Scenario:
    panel: PanelGeometry
    rf: RfConstants = field(default_factory=RfConstants)
    bs: Point3 = field(default_factory=lambda: Point3(-500.0, 0.0, 2.0))
    region: MuRegion = field(default_factory=MuRegion)
    candidate_set_mode: str = "bracketing"
    init_mode: str = "nearest"
    bound: str = "angular"

    def __post_init__(self):
        object.__setattr__(self, "bs", Point3.of(self.bs))
        check_bs_side(self.panel, self.bs)

    def with_panel_size(self, rows: int, cols: int) -> "Scenario":
        return replace(self, panel=self.panel.with_size(rows, cols))


@dataclass(frozen=True)
class TrialResult:
    """One user placement.

    ``se_*`` use the shared small-scale draws; ``se_*_los`` are the
    deterministic LoS-composite objective values the optimizer works on.
    """

    mu_position: Point3
    side: Side
    se_ios: float
    se_irs: float
    se_direct: float
    phases: PhaseShiftVector
    se_ios_los: float
    se_irs_los: float
    se_direct_los: float


@dataclass(frozen=True)
class SweepPoint:
    m_elements: int
    avg_se: dict
    std_err: dict
    n_trials: int

    def improvement(self, system: str) -> tuple[float, float]:
        """(SE ratio, linear-SNR-equivalent ratio) of ``system`` over direct-only."""
        se, base = self.avg_se[system], self.avg_se["direct"]
        se_ratio = se / base if base > 0 else math.inf
        snr_ratio = math.expm1(se * math.log(2)) / math.expm1(base * math.log(2)) if base > 0 else math.inf
        return se_ratio, snr_ratio


@dataclass(frozen=True)
class HeatmapCell:
    x: float
    y: float
    side: Side
    se_ios: float
    se_irs: float
    se_direct: float


def sample_mu(region: MuRegion, rng: np.random.Generator, panel: Optional[PanelGeometry] = None) -> Point3:
    """Uniform point on the region's disk, kept at least 1 cm off the panel plane."""
    while True:
        r = region.radius * math.sqrt(rng.random())
        a = 2.0 * math.pi * rng.random()
        p = Point3(region.center.x + r * math.cos(a), region.center.y + r * math.sin(a), region.height)
        if panel is None or abs(panel.signed_distance(p)) >= PLANE_GUARD:
            return p


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def _optimize(scenario: Scenario, terms: ChannelTerms, mu: PointLike, rf: RfConstants,
              rng: np.random.Generator) -> OptimizationResult:
    problem = PhasorProblem.from_terms(terms, scenario.bs, mu, rf, scenario.panel.s_a)
    return solve_bnb(
        problem, rf, scenario.candidate_set_mode,
        init=scenario.init_mode, bound=scenario.bound, rng=rng,
    )


def _systems(scenario: Scenario, mu: PointLike, rng: np.random.Generator):
    """Optimized channel terms and phases for the IOS and IRS at ``mu``."""
    side = side_of(scenario.panel, mu)
    rf = scenario.rf
    terms = channel_terms(scenario.panel, scenario.bs, mu, rf)
    ios = _optimize(scenario, terms, mu, rf, rng)
    if side is Side.REFLECTIVE:
        irs_terms, irs = terms, ios
    else:
        irs_rf = rf.reflect_only()
        irs_terms = channel_terms(scenario.panel, scenario.bs, mu, irs_rf)
        irs = _optimize(scenario, irs_terms, mu, irs_rf, rng)
    return side, terms, ios, irs_terms, irs


def evaluate_trial(scenario: Scenario, mu: PointLike, rng: np.random.Generator) -> TrialResult:
    mu = Point3.of(mu)
    # direct-path draw first so it is shared across panel sizes too
    ss_direct = small_scale(rng)
    side, terms, ios, irs_terms, irs = _systems(scenario, mu, rng)
    rf = scenario.rf
    ss = np.append(small_scale(rng, terms.n_elements), ss_direct)
    direct = terms.direct_only()
    return TrialResult(
        mu_position=mu,
        side=side,
        se_ios=float(spectral_efficiency(terms.draw(ios.psi, ss), rf)),
        se_irs=float(spectral_efficiency(irs_terms.draw(irs.psi, ss), rf)),
        se_direct=float(spectral_efficiency(direct.draw(ios.psi, ss), rf)),
        phases=ios.phases,
        se_ios_los=ios.se,
        se_irs_los=irs.se,
        se_direct_los=float(spectral_efficiency(abs(terms.direct_los), rf)),
    )


def run_trials(scenario: Scenario, n_trials: int, master_seed: int) -> list[TrialResult]:
    out = []
    for i in range(n_trials):
        rng = trial_rng(master_seed, i)
        mu = sample_mu(scenario.region, rng, scenario.panel)
        out.append(evaluate_trial(scenario, mu, rng))
    return out


def summarize(m_elements: int, trials: list[TrialResult]) -> SweepPoint:
    n = len(trials)
    avg, err = {}, {}
    for system in SYSTEMS:
        v = np.array([getattr(t, f"se_{system}") for t in trials])
        avg[system] = float(v.mean())
        err[system] = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SweepPoint(m_elements, avg, err, n)


def size_sweep(scenario: Scenario, sizes: Iterable[int], n_trials: int, master_seed: int) -> list[SweepPoint]:
    """Average SE per system for square panels of side ``n`` in ``sizes``.

    Trial ``i`` draws from the stream seeded by ``(master_seed, i)`` for every
    size, so user positions are common across sizes.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    points = []
    for n in sizes:
        if n < 1:
            raise ValueError(f"panel side must be >= 1, got {n}")
        trials = run_trials(scenario.with_panel_size(n, n), n_trials, master_seed)
        points.append(summarize(n * n, trials))
    return points


def grid_axis(lo: float, hi: float, step: float) -> np.ndarray:
    if not step > 0 or hi < lo:
        raise ValueError("grid needs step > 0 and hi >= lo")
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 12)


def heatmap_cell(scenario: Scenario, x: float, y: float) -> Optional[HeatmapCell]:
    """Expected-power SE at (x, y) for each system, or None on the panel plane."""
    mu = Point3(float(x), float(y), scenario.region.height)
    try:
        side, terms, ios, irs_terms, irs = _systems(scenario, mu, None)
    except GeometryError:
        return None
    rf = scenario.rf
    direct = terms.direct_only()
    return HeatmapCell(
        x=float(x),
        y=float(y),
        side=side,
        se_ios=float(se_from_power(terms.expected_power(ios.psi), rf)),
        se_irs=float(se_from_power(irs_terms.expected_power(irs.psi), rf)),
        se_direct=float(se_from_power(direct.expected_power(ios.psi), rf)),
    )


def heatmap(scenario: Scenario, xs: Iterable[float], ys: Iterable[float]) -> list[HeatmapCell]:
    """Cells in y-major, x-ascending order; points on the panel plane are skipped."""
    if scenario.init_mode == "random":
        raise ValueError("heatmaps are deterministic; use init_mode='nearest'")
    cells = []
    for y in sorted(ys):
        for x in sorted(xs):
            cell = heatmap_cell(scenario, x, y)
            if cell is not None:
                cells.append(cell)
    return cells
