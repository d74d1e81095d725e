"""Cascaded BS -> surface -> MU channel with a Rician direct path.

Each element forwards the incident wave with a cos^3 arrival pattern and a
two-sided departure pattern: full strength toward the base-station side,
scaled by ``epsilon`` toward the opposite side. The element LoS terms follow a
product-distance path loss; NLoS terms use a log-distance amplitude law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .geometry import (
    Direction,
    GeometryError,
    PanelGeometry,
    PointLike,
    _vec,
    directions,
    element_angles,
)

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watts_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w * 1000.0)


@dataclass(frozen=True)
class RfConstants:
    """Radio constants. Powers are linear watts, gains linear, lengths metres.

    ``kappa`` may be ``math.inf`` for a pure line-of-sight channel.
    ``nlos_ref_gain`` and ``nlos_exponent`` parameterise the NLoS amplitude
    ``sqrt(C) * d**(-beta/2)``.
    """

    wavelength: float = 0.06
    kappa: float = 4.0
    tx_gain: float = 1.0
    rx_gain: float = 1.0
    element_gain: float = 1.0
    tx_pattern_gain: float = 1.0
    rx_pattern_gain: float = 1.0
    alpha: float = 2.0
    tx_power: float = field(default_factory=lambda: dbm_to_watts(40.0))
    noise_power: float = field(default_factory=lambda: dbm_to_watts(-96.0))
    epsilon: float = 1.0
    gamma_sq: float = 1.0
    nlos_exponent: float = 3.5
    nlos_ref_gain: float = 1e-3
    direct_blocked: bool = False

    def __post_init__(self):
        positive = ("wavelength", "tx_gain", "rx_gain", "element_gain", "tx_power", "noise_power")
        for name in positive:
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"rf.{name} must be positive and finite, got {v}")
        if not self.kappa >= 0:
            raise ValueError(f"rf.kappa must be >= 0, got {self.kappa}")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"rf.epsilon must be >= 0, got {self.epsilon}")
        if not 0 < self.gamma_sq <= 1:
            raise ValueError(f"rf.gamma_sq must lie in (0, 1], got {self.gamma_sq}")
        for name in ("tx_pattern_gain", "rx_pattern_gain"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"rf.{name} must lie in (0, 1], got {v}")
        if not math.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"rf.alpha must be >= 0, got {self.alpha}")
        if not (self.nlos_ref_gain >= 0 and math.isfinite(self.nlos_ref_gain)):
            raise ValueError("rf.nlos_ref_gain must be >= 0")
        if not (self.nlos_exponent >= 0 and math.isfinite(self.nlos_exponent)):
            raise ValueError("rf.nlos_exponent must be >= 0")

    @property
    def los_weight(self) -> float:
        """sqrt(kappa / (1 + kappa))"""
        if math.isinf(self.kappa):
            return 1.0
        return math.sqrt(self.kappa / (1.0 + self.kappa))

    @property
    def nlos_weight(self) -> float:
        """sqrt(1 / (1 + kappa))"""
        if math.isinf(self.kappa):
            return 0.0
        return math.sqrt(1.0 / (1.0 + self.kappa))

    def reflect_only(self) -> "RfConstants":
        """Same constants with the transmissive branch switched off (an IRS)."""
        return replace(self, epsilon=0.0)


@dataclass(frozen=True)
class PhaseShiftVector:
    """Discrete phase index per element; realised phase is ``index * 2*pi/s_a``."""

    indices: tuple
    s_a: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if self.s_a < 1:
            raise ValueError("s_a must be >= 1")
        bad = [i for i in idx if not 0 <= i < self.s_a]
        if bad:
            raise ValueError(f"phase indices {bad} outside [0, {self.s_a})")

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def phases(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=float) * (TWO_PI / self.s_a)

    @classmethod
    def zeros(cls, m: int, s_a: int) -> "PhaseShiftVector":
        return cls((0,) * m, s_a)


Phases = Union[PhaseShiftVector, Sequence[float], np.ndarray]


def _as_phases(phases: Phases, m: int) -> np.ndarray:
    psi = phases.phases if isinstance(phases, PhaseShiftVector) else np.asarray(phases, float)
    if psi.shape != (m,):
        raise ValueError(f"expected {m} phase shifts, got shape {psi.shape}")
    return psi


def pattern_arrival(theta_a):
    """Normalised arrival power pattern |cos^3(theta)|."""
    return np.abs(np.cos(theta_a) ** 3)


def pattern_departure(theta_d, epsilon: float):
    """Two-sided departure pattern.

    |cos^3 theta| toward the base-station side, ``epsilon * |cos^3(pi - theta)|``
    behind the panel, and exactly 0 at grazing (theta == pi/2).
    """
    theta_d = np.asarray(theta_d, dtype=float)
    front = np.abs(np.cos(theta_d) ** 3)
    back = epsilon * np.abs(np.cos(np.pi - theta_d) ** 3)
    k = np.where(theta_d < HALF_PI, front, back)
    k = np.where(theta_d == HALF_PI, 0.0, k)
    return k if k.ndim else float(k)


def element_power_gain(
    arrival: Direction,
    departure: Direction,
    psi: float,
    rf: RfConstants,
    panel: PanelGeometry,
) -> complex:
    k_a = pattern_arrival(arrival.theta)
    k_d = pattern_departure(departure.theta, rf.epsilon)
    amp = math.sqrt(rf.element_gain * k_a * k_d * panel.delta_x * panel.delta_y * rf.gamma_sq)
    return amp * complex(math.cos(psi), -math.sin(psi))


def direct_los(bs: PointLike, mu: PointLike, rf: RfConstants) -> complex:
    d = float(np.linalg.norm(_vec(bs) - _vec(mu)))
    if d == 0.0:
        raise GeometryError("base station and user coincide")
    amp = math.sqrt(rf.tx_gain * rf.rx_gain * d ** (-rf.alpha))
    return amp * np.exp(-1j * TWO_PI * d / rf.wavelength)


def nlos_pathloss(d, rf: RfConstants):
    """NLoS amplitude gain sqrt(C) * d**(-beta/2)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("NLoS distance must be positive")
    pl = math.sqrt(rf.nlos_ref_gain) * d ** (-rf.nlos_exponent / 2.0)
    return pl if pl.ndim else float(pl)


def small_scale(rng: np.random.Generator, size=None):
    """Unit-power circularly-symmetric complex Gaussian draw(s)."""
    shape = (2,) if size is None else (2, *np.atleast_1d(size))
    re, im = rng.standard_normal(shape)
    return (re + 1j * im) / math.sqrt(2.0)


def direct_channel(bs: PointLike, mu: PointLike, rf: RfConstants, rng: np.random.Generator) -> complex:
    if rf.direct_blocked:
        return 0j
    d = float(np.linalg.norm(_vec(bs) - _vec(mu)))
    los = direct_los(bs, mu, rf)
    return rf.los_weight * los + rf.nlos_weight * nlos_pathloss(d, rf) * complex(small_scale(rng))


def element_los(
    panel: PanelGeometry, m: int, bs: PointLike, mu: PointLike, psi: float, rf: RfConstants
) -> complex:
    """Element LoS term composed one factor at a time."""
    arrival, departure, d_bs, d_mu = directions(panel, m, bs, mu)
    g = element_power_gain(arrival, departure, psi, rf, panel)
    scale = (
        rf.wavelength
        * math.sqrt(rf.tx_gain * rf.tx_pattern_gain * rf.rx_gain * rf.rx_pattern_gain)
        / ((4.0 * math.pi) ** 1.5 * d_bs * d_mu)
    )
    return scale * np.exp(-1j * TWO_PI * (d_bs + d_mu) / rf.wavelength) * g


def element_channel(
    panel: PanelGeometry,
    m: int,
    bs: PointLike,
    mu: PointLike,
    psi: float,
    rf: RfConstants,
    rng: np.random.Generator,
) -> complex:
    los = element_los(panel, m, bs, mu, psi, rf)
    _, departure, d_bs, d_mu = directions(panel, m, bs, mu)
    # an element that does not radiate toward the user forwards nothing
    if pattern_departure(departure.theta, rf.epsilon) == 0.0:
        return 0j
    nlos = nlos_pathloss(d_bs, rf) * nlos_pathloss(d_mu, rf) * complex(small_scale(rng))
    return rf.los_weight * los + rf.nlos_weight * nlos


@dataclass(frozen=True)
class ChannelTerms:
    """Phase-independent pieces of the channel for one BS/MU placement.

    Element ``m``'s LoS term under phase shift ``psi`` is
    ``los_amplitude[m] * exp(1j * (base_phase[m] - psi))``.
    """

    los_amplitude: np.ndarray
    base_phase: np.ndarray
    nlos_amplitude: np.ndarray
    direct_los: complex
    direct_nlos_amplitude: float
    los_weight: float
    nlos_weight: float

    @property
    def n_elements(self) -> int:
        return len(self.los_amplitude)

    def element_los(self, psi: np.ndarray) -> np.ndarray:
        return self.los_amplitude * np.exp(1j * (self.base_phase - psi))

    def los_sum(self, psi: np.ndarray) -> complex:
        """Unweighted LoS composite: sum of element LoS terms plus direct LoS."""
        return complex(np.sum(self.element_los(psi)) + self.direct_los)

    def nlos_power(self) -> float:
        return float(np.sum(self.nlos_amplitude**2) + self.direct_nlos_amplitude**2)

    def expected_power(self, psi: np.ndarray) -> float:
        return (
            self.los_weight**2 * abs(self.los_sum(psi)) ** 2
            + self.nlos_weight**2 * self.nlos_power()
        )

    def direct_only(self) -> "ChannelTerms":
        """The same placement with the surface removed."""
        zeros = np.zeros_like(self.los_amplitude)
        return replace(self, los_amplitude=zeros, nlos_amplitude=zeros)

    def draw(self, psi: np.ndarray, ss: np.ndarray) -> np.ndarray:
        """Composite channel for small-scale draws ``ss`` of shape (..., M + 1).

        Column ``m < M`` feeds element ``m``; the last column feeds the direct path.
        """
        los = self.los_weight * self.los_sum(psi)
        nlos_amp = np.append(self.nlos_amplitude, self.direct_nlos_amplitude)
        return los + self.nlos_weight * (ss @ nlos_amp)


def channel_terms(panel: PanelGeometry, bs: PointLike, mu: PointLike, rf: RfConstants) -> ChannelTerms:
    ang = element_angles(panel, bs, mu)
    k_a = pattern_arrival(ang.theta_a)
    k_d = np.asarray(pattern_departure(ang.theta_d, rf.epsilon), dtype=float)
    g_amp = np.sqrt(rf.element_gain * k_a * k_d * panel.delta_x * panel.delta_y * rf.gamma_sq)
    los_amp = (
        rf.wavelength
        * math.sqrt(rf.tx_gain * rf.tx_pattern_gain * rf.rx_gain * rf.rx_pattern_gain)
        / ((4.0 * math.pi) ** 1.5 * ang.d_src * ang.d_dst)
        * g_amp
    )
    base = np.mod(-TWO_PI * (ang.d_src + ang.d_dst) / rf.wavelength, TWO_PI)
    nlos_amp = np.where(
        k_d > 0.0,
        nlos_pathloss(ang.d_src, rf) * nlos_pathloss(ang.d_dst, rf),
        0.0,
    )
    if rf.direct_blocked:
        d_los, d_nlos = 0j, 0.0
    else:
        d = float(np.linalg.norm(_vec(bs) - _vec(mu)))
        d_los, d_nlos = complex(direct_los(bs, mu, rf)), nlos_pathloss(d, rf)
    return ChannelTerms(
        los_amplitude=los_amp,
        base_phase=base,
        nlos_amplitude=np.asarray(nlos_amp, dtype=float),
        direct_los=d_los,
        direct_nlos_amplitude=d_nlos,
        los_weight=rf.los_weight,
        nlos_weight=rf.nlos_weight,
    )


@dataclass(frozen=True)
class ChannelRealization:
    h_direct_los: complex
    h_direct_nlos: complex
    h_element_los: np.ndarray
    h_element_nlos: np.ndarray
    los_weight: float
    nlos_weight: float

    @property
    def h_direct(self) -> complex:
        return self.los_weight * self.h_direct_los + self.nlos_weight * self.h_direct_nlos

    @property
    def h_element(self) -> np.ndarray:
        return self.los_weight * self.h_element_los + self.nlos_weight * self.h_element_nlos

    @property
    def h_total(self) -> complex:
        return complex(np.sum(self.h_element) + self.h_direct)

    @property
    def h_total_los(self) -> complex:
        """Unweighted LoS composite (element LoS terms plus direct LoS)."""
        return complex(np.sum(self.h_element_los) + self.h_direct_los)


def composite_channel(
    panel: PanelGeometry,
    bs: PointLike,
    mu: PointLike,
    phases: Phases,
    rf: RfConstants,
    rng: np.random.Generator,
    terms: ChannelTerms | None = None,
) -> ChannelRealization:
    terms = terms if terms is not None else channel_terms(panel, bs, mu, rf)
    psi = _as_phases(phases, terms.n_elements)
    ss = small_scale(rng, terms.n_elements + 1)
    return ChannelRealization(
        h_direct_los=terms.direct_los,
        h_direct_nlos=terms.direct_nlos_amplitude * ss[-1],
        h_element_los=terms.element_los(psi),
        h_element_nlos=terms.nlos_amplitude * ss[:-1],
        los_weight=terms.los_weight,
        nlos_weight=terms.nlos_weight,
    )


def spectral_efficiency(h, rf: RfConstants):
    """log2(1 + P |h|^2 / sigma^2) in bit/s/Hz."""
    snr = rf.tx_power * np.abs(h) ** 2 / rf.noise_power
    se = np.log2(1.0 + snr)
    return se if np.ndim(se) else float(se)


def se_from_power(power, rf: RfConstants):
    se = np.log2(1.0 + rf.tx_power * np.asarray(power) / rf.noise_power)
    return se if np.ndim(se) else float(se)


def expected_channel_power(
    panel: PanelGeometry, bs: PointLike, mu: PointLike, phases: Phases, rf: RfConstants
) -> float:
    """Second moment E|h|^2 over the NLoS draws, in closed form."""
    terms = channel_terms(panel, bs, mu, rf)
    return terms.expected_power(_as_phases(phases, terms.n_elements))
