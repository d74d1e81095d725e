"""Phase-shift design: closed-form continuous optimum and discrete search.

The search objective is the deterministic line-of-sight composite
``|D + sum_m A_m exp(j(base_m - psi_m))|`` where ``D`` is the direct-path LoS
phasor. NLoS terms add phase-independent power, so they never move the argmax.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import (
    TWO_PI,
    ChannelTerms,
    PhaseShiftVector,
    RfConstants,
    channel_terms,
    spectral_efficiency,
)
from .geometry import PanelGeometry, PointLike, _vec, element_angles

MODES = ("bracketing", "full")
BOUNDS = ("relaxation", "angular")
BRUTE_FORCE_MAX_LEAVES = 2**24
TIE_RTOL = 1e-12


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PhasorProblem:
    """Element LoS amplitudes/phases plus the direct LoS phasor.

    ``reference_phase`` is the direct-path LoS phase even when the direct
    path is blocked (``direct == 0``), so the continuous optimum stays defined.
    """

    amplitude: np.ndarray
    base_phase: np.ndarray
    direct: complex
    reference_phase: float
    s_a: int

    @classmethod
    def from_scenario(
        cls, panel: PanelGeometry, bs: PointLike, mu: PointLike, rf: RfConstants
    ) -> "PhasorProblem":
        return cls.from_terms(channel_terms(panel, bs, mu, rf), bs, mu, rf, panel.s_a)

    @classmethod
    def from_terms(
        cls, terms: ChannelTerms, bs: PointLike, mu: PointLike, rf: RfConstants, s_a: int
    ) -> "PhasorProblem":
        d = float(np.linalg.norm(_vec(bs) - _vec(mu)))
        return cls(
            amplitude=terms.los_amplitude,
            base_phase=terms.base_phase,
            direct=terms.direct_los,
            reference_phase=float(np.mod(-TWO_PI * d / rf.wavelength, TWO_PI)),
            s_a=s_a,
        )

    @property
    def n_elements(self) -> int:
        return len(self.amplitude)

    @property
    def step(self) -> float:
        return TWO_PI / self.s_a

    def phasors(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=float)
        return self.amplitude * np.exp(1j * (self.base_phase - idx * self.step))

    def los_sum(self, indices) -> complex:
        return complex(self.direct + np.sum(self.phasors(indices)))

    def objective(self, indices) -> float:
        return abs(self.los_sum(indices))

    def continuous_optimum(self) -> np.ndarray:
        return np.mod(self.base_phase - self.reference_phase, TWO_PI)

    def candidates(self, mode: str) -> list[tuple[int, ...]]:
        """Sorted candidate phase indices per element."""
        if mode == "full":
            return [tuple(range(self.s_a))] * self.n_elements
        if mode != "bracketing":
            raise ValueError(f"unknown candidate mode {mode!r}")
        low, high = bracketing_candidates(self.continuous_optimum(), self.s_a)
        return [tuple(sorted({int(lo), int(hi)})) for lo, hi in zip(low, high)]

    def node(self, fixed: Sequence[Optional[int]]) -> "BnBNode":
        fixed = tuple(fixed)
        if len(fixed) != self.n_elements:
            raise ValueError("node must assign every element or None")
        mask = np.array([f is not None for f in fixed], dtype=bool)
        idx = np.array([0 if f is None else f for f in fixed], dtype=float)
        partial = complex(self.direct + np.sum(self.phasors(idx)[mask]))
        return BnBNode(fixed, partial, float(np.sum(self.amplitude[~mask])))


@dataclass(frozen=True)
class BnBNode:
    fixed: tuple
    partial_phasor: complex
    remaining_amplitude: float


@dataclass(frozen=True)
class OptimizationResult:
    psi: np.ndarray
    se: float
    amplitude: float
    method: str
    phases: Optional[PhaseShiftVector] = None
    nodes_visited: int = 0
    nodes_pruned: int = 0


def continuous_optimum(panel: PanelGeometry, bs: PointLike, mu: PointLike, rf: RfConstants) -> np.ndarray:
    """Per-element phase that co-phases every cascaded LoS term with the direct LoS."""
    ang = element_angles(panel, bs, mu)
    d = float(np.linalg.norm(_vec(bs) - _vec(mu)))
    detour = d - ang.d_src - ang.d_dst
    return np.mod(TWO_PI / rf.wavelength * detour, TWO_PI)


def bracketing_candidates(psi_star, s_a: int):
    """Indices of the two grid phases enclosing ``psi_star`` (cyclically).

    An exact grid point brackets upward: it becomes the low index.
    """
    if s_a < 1:
        raise ValueError("s_a must be >= 1")
    t = np.mod(np.asarray(psi_star, dtype=float), TWO_PI) / (TWO_PI / s_a)
    low = np.mod(np.floor(t).astype(int), s_a)
    high = np.mod(low + 1, s_a)
    if low.ndim == 0:
        return int(low), int(high)
    return low, high


def quantize_nearest(psi_star, s_a: int):
    """Grid index closest to ``psi_star`` in cyclic distance; ties go to the lower index."""
    if s_a < 1:
        raise ValueError("s_a must be >= 1")
    t = np.mod(np.asarray(psi_star, dtype=float), TWO_PI) / (TWO_PI / s_a)
    f = np.floor(t)
    lo, hi = np.mod(f, s_a).astype(int), np.mod(f + 1, s_a).astype(int)
    frac = t - f
    pick = np.where(frac < 0.5, lo, np.where(frac > 0.5, hi, np.minimum(lo, hi)))
    return int(pick) if pick.ndim == 0 else pick


def _se_of_amplitude(amp: float, rf: RfConstants) -> float:
    return float(spectral_efficiency(amp, rf))


def node_upper_bound(node: BnBNode, rf: RfConstants) -> float:
    """SE bound letting every unfixed element align with the partial sum."""
    return _se_of_amplitude(abs(node.partial_phasor) + node.remaining_amplitude, rf)


class _AngularBound:
    """Exact best-completion amplitude for nodes that fix ``order[:depth]``.

    For a reference direction phi, the best choice for each free element is the
    candidate closest to phi, and the optimum over completions equals the
    largest |sum| among the piecewise-constant choices met while sweeping phi
    around the circle. Each swept state is a genuine completion, so the value
    is both admissible and attained.
    """

    def __init__(self, problem: PhasorProblem, cands: list[tuple[int, ...]], order: np.ndarray):
        init = np.zeros(len(order), dtype=complex)
        ev_angle, ev_depth, ev_rank, ev_delta = [], [], [], []
        for depth, e in enumerate(order):
            c = np.asarray(cands[e])
            a = np.mod(problem.base_phase[e] - c * problem.step, TWO_PI)
            z = problem.amplitude[e] * np.exp(1j * a)
            if len(c) == 1:
                init[depth] = z[0]
                continue
            srt = np.argsort(a, kind="stable")
            a, z = a[srt], z[srt]
            nxt = np.roll(np.arange(len(a)), -1)
            bis = np.mod(a + np.mod(a[nxt] - a, TWO_PI) / 2.0, TWO_PI)
            seq = np.argsort(bis, kind="stable")
            # the candidate active just before the first switch starts the sweep
            init[depth] = z[seq[0]]
            for r, i in enumerate(seq):
                ev_angle.append(bis[i])
                ev_depth.append(depth)
                ev_rank.append(r)
                ev_delta.append(z[nxt[i]] - z[i])
        srt = np.lexsort((np.asarray(ev_rank, dtype=int), np.asarray(ev_depth, dtype=int),
                          np.asarray(ev_angle, dtype=float)))
        self.ev_depth = np.asarray(ev_depth, dtype=int)[srt]
        self.ev_delta = np.asarray(ev_delta, dtype=complex)[srt]
        self.init_suffix = np.append(init[::-1].cumsum()[::-1], 0j)
        self.rel_slack = 8.0 * (len(self.ev_delta) + len(order) + 1) * np.finfo(float).eps

    def __call__(self, depth: int, partial: complex) -> float:
        z0 = partial + self.init_suffix[depth]
        delta = self.ev_delta[self.ev_depth >= depth]
        if len(delta) == 0:
            return abs(z0)
        return max(abs(z0), float(np.abs(z0 + np.cumsum(delta)).max()))


def _initial_indices(problem, cands, init, rng):
    if init == "nearest":
        q = np.atleast_1d(quantize_nearest(problem.continuous_optimum(), problem.s_a))
        return tuple(int(v) if v in c else c[0] for v, c in zip(q, cands))
    if init == "random":
        if rng is None:
            raise ValueError("random initialisation needs an rng")
        return tuple(int(c[rng.integers(len(c))]) for c in cands)
    raise ValueError(f"unknown init mode {init!r}")


def solve_bnb(
    problem: PhasorProblem,
    rf: RfConstants,
    mode: str = "bracketing",
    *,
    init: str = "nearest",
    bound: str = "relaxation",
    rng: Optional[np.random.Generator] = None,
) -> OptimizationResult:
    """Branch-and-bound over the per-element candidate sets.

    ``bound="relaxation"`` lets every unfixed element align with the partial
    sum. Elements are branched in order of decreasing amplitude, depth first,
    better-bound child first. A node is pruned only when its bound falls below
    the incumbent by more than the tie tolerance, so the returned vector is the
    lexicographically smallest near-optimal leaf, as with
    :func:`solve_brute_force`.

    ``bound="angular"`` uses the exact best-completion value instead. The
    root bound is then the optimum, and a single dive in element order that
    keeps the lowest-index child still able to reach it lands on the same
    leaf. Should rounding ever break the dive, the full search runs instead.

    Zero-amplitude elements cannot change the objective and are fixed at
    their lowest candidate without branching.
    """
    if bound not in BOUNDS:
        raise ValueError(f"unknown bound {bound!r}")
    m = problem.n_elements
    cands = problem.candidates(mode)
    start = _initial_indices(problem, cands, init, rng)
    method = f"{mode}-bnb"
    if m == 0:
        return _result(problem, rf, (), method, visited=1)

    z = [problem.amplitude[e] * np.exp(1j * (problem.base_phase[e] - np.asarray(cands[e]) * problem.step))
         for e in range(m)]
    free = np.flatnonzero(problem.amplitude > 0)
    assign = [c[0] for c in cands]
    scale = abs(problem.direct) + float(np.sum(problem.amplitude))
    tie_tol = TIE_RTOL * scale
    root = complex(problem.direct)

    if bound == "angular":
        dive = _angular_dive(problem, cands, free, z, list(assign), root, scale, tie_tol)
        if dive is not None:
            vec, visited, pruned = dive
            return _result(problem, rf, vec, method, visited, pruned)

    order = free[np.argsort(-problem.amplitude[free], kind="stable")]
    n = len(order)
    if bound == "angular":
        angular = _AngularBound(problem, cands, order)
        slack = angular.rel_slack * scale

        def ub(depth, partial):
            return angular(depth, partial) + slack
    else:
        rem = np.append(problem.amplitude[order][::-1].cumsum()[::-1], 0.0)

        def ub(depth, partial):
            return abs(partial) + rem[depth]

    best = problem.objective(start)
    near = [(best, start)]
    visited = pruned = 0
    stack = [(0, root, -1, ub(0, root))]
    while stack:
        depth, partial, choice, bnd = stack.pop()
        if depth:
            assign[order[depth - 1]] = choice
        if bnd < best - tie_tol:
            pruned += 1
            continue
        visited += 1
        if depth == n:
            vec = tuple(assign)
            val = problem.objective(vec)
            if val >= best - tie_tol:
                near.append((val, vec))
                if val > best:
                    best = val
                    near = [(v, s) for v, s in near if v >= best - tie_tol]
            continue
        e = order[depth]
        children = []
        for c, zc in zip(cands[e], z[e]):
            p = partial + zc
            b = ub(depth + 1, p)
            if b < best - tie_tol:
                pruned += 1
            else:
                children.append((b, -c, p, c))
        # best bound popped first, ties to the lower index
        children.sort(key=lambda t: (t[0], t[1]))
        for b, _, p, c in children:
            stack.append((depth + 1, p, c, b))

    vec = min(s for v, s in near if v >= best - tie_tol)
    return _result(problem, rf, vec, method, visited, pruned)


def _angular_dive(problem, cands, free, z, assign, root, scale, tie_tol):
    angular = _AngularBound(problem, cands, free)
    slack = angular.rel_slack * scale
    target = angular(0, root)
    partial, visited, pruned = root, 1, 0
    for depth, e in enumerate(free):
        for c, zc in zip(cands[e], z[e]):
            p = partial + zc
            if angular(depth + 1, p) + slack >= target - tie_tol:
                assign[e], partial = c, p
                visited += 1
                break
            pruned += 1
        else:
            return None
    vec = tuple(assign)
    if problem.objective(vec) < target - tie_tol - 2 * slack:
        return None
    return vec, visited, pruned


def solve_brute_force(problem: PhasorProblem, rf: RfConstants, mode: str = "bracketing") -> OptimizationResult:
    """Exhaustive enumeration of the candidate set in lexicographic order."""
    cands = problem.candidates(mode)
    m = problem.n_elements
    sizes = [len(c) for c in cands]
    leaves = math.prod(sizes)
    if leaves > BRUTE_FORCE_MAX_LEAVES:
        raise InstanceTooLarge(f"{leaves} leaves exceeds the {BRUTE_FORCE_MAX_LEAVES} limit")
    if m == 0:
        return _result(problem, rf, (), "brute-force", visited=1)
    z = [problem.amplitude[e] * np.exp(1j * (problem.base_phase[e] - np.asarray(cands[e]) * problem.step))
         for e in range(m)]

    # vectorise the trailing elements, loop over the leading ones
    split, inner = m, 1
    while split > 0 and inner * sizes[split - 1] <= 2**16:
        split -= 1
        inner *= sizes[split]
    table = np.zeros(1, dtype=complex)
    for e in range(split, m):
        table = (table[:, None] + z[e][None, :]).ravel()

    combos = list(itertools.product(*(range(s) for s in sizes[:split])))

    def chunk(combo):
        head = problem.direct + sum((z[e][k] for e, k in enumerate(combo)), 0j)
        return np.abs(head + table)

    peaks = np.array([chunk(c).max() for c in combos])
    best = float(peaks.max())
    threshold = best - TIE_RTOL * (abs(problem.direct) + float(np.sum(problem.amplitude)))
    # the first chunk reaching the tie window holds the lexicographically first leaf
    combo = combos[int(np.flatnonzero(peaks >= threshold)[0])]
    hit = int(np.flatnonzero(chunk(combo) >= threshold)[0])
    tail = np.unravel_index(hit, sizes[split:]) if split < m else ()
    pos = tuple(combo) + tuple(int(t) for t in tail)
    vec = tuple(cands[e][k] for e, k in enumerate(pos))
    return _result(problem, rf, vec, "brute-force", visited=leaves)


def _result(problem, rf, vec, method, visited=0, pruned=0) -> OptimizationResult:
    phases = PhaseShiftVector(vec, problem.s_a)
    amp = problem.objective(vec)
    return OptimizationResult(
        psi=phases.phases,
        se=_se_of_amplitude(amp, rf),
        amplitude=amp,
        method=method,
        phases=phases,
        nodes_visited=visited,
        nodes_pruned=pruned,
    )


def solve_continuous(problem: PhasorProblem, rf: RfConstants) -> OptimizationResult:
    psi = problem.continuous_optimum()
    amp = abs(problem.direct + np.sum(problem.amplitude * np.exp(1j * (problem.base_phase - psi))))
    return OptimizationResult(psi=psi, se=_se_of_amplitude(amp, rf), amplitude=amp, method="continuous")


def solve_nearest(problem: PhasorProblem, rf: RfConstants) -> OptimizationResult:
    idx = np.atleast_1d(quantize_nearest(problem.continuous_optimum(), problem.s_a))
    return _result(problem, rf, tuple(int(i) for i in idx), "nearest")


def branch_and_bound(
    panel: PanelGeometry,
    bs: PointLike,
    mu: PointLike,
    rf: RfConstants,
    candidate_set_mode: str = "bracketing",
    **kwargs,
) -> OptimizationResult:
    problem = PhasorProblem.from_scenario(panel, bs, mu, rf)
    return solve_bnb(problem, rf, candidate_set_mode, **kwargs)


def brute_force(
    panel: PanelGeometry,
    bs: PointLike,
    mu: PointLike,
    rf: RfConstants,
    candidate_set_mode: str = "bracketing",
) -> OptimizationResult:
    problem = PhasorProblem.from_scenario(panel, bs, mu, rf)
    return solve_brute_force(problem, rf, candidate_set_mode)
