"""Panel, base-station and user placement in 3-D space.

The surface is a flat ``rows x cols`` grid of identical elements. Its unit
normal points toward the base station, so a departure angle below pi/2 means
the receiver sits on the reflective side and above pi/2 on the transmissive
side.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

_PLANE_TOL = 1e-12


class GeometryError(ValueError):
    """Degenerate or inconsistent geometry."""


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise GeometryError(f"non-finite coordinate in {self!r}")

    @classmethod
    def of(cls, p: "PointLike") -> "Point3":
        if isinstance(p, Point3):
            return p
        x, y, z = (float(c) for c in p)
        return cls(x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance(self, other: "PointLike") -> float:
        return float(np.linalg.norm(self.as_array() - _vec(other)))


PointLike = Union[Point3, Sequence[float], np.ndarray]


def _vec(p: PointLike) -> np.ndarray:
    if isinstance(p, Point3):
        return p.as_array()
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise GeometryError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise GeometryError("non-finite coordinate")
    return a


@dataclass(frozen=True)
class Direction:
    """Polar angle from the panel normal and azimuth in the panel plane."""

    theta: float
    phi: float


class Side(enum.Enum):
    REFLECTIVE = "reflective"
    TRANSMISSIVE = "transmissive"


@dataclass(frozen=True)
class PanelGeometry:
    """A planar grid of ``rows x cols`` elements of size ``delta_x`` by ``delta_y``.

    ``normal`` points toward the base station. ``up`` fixes the in-plane
    orientation: rows are stacked along it (pitch ``delta_y``) and columns run
    along ``up x normal`` (pitch ``delta_x``). Elements are numbered row-major
    from 0, so element ``m`` sits in row ``m // cols`` and column ``m % cols``.
    """

    rows: int
    cols: int
    delta_x: float
    delta_y: float
    center: Point3 = field(default_factory=lambda: Point3(0.0, 0.0, 0.0))
    normal: tuple = (-1.0, 0.0, 0.0)
    up: tuple = (0.0, 0.0, 1.0)
    n_diodes: int = 2
    s_a: int = 4

    def __post_init__(self):
        object.__setattr__(self, "center", Point3.of(self.center))
        object.__setattr__(self, "normal", tuple(float(c) for c in self.normal))
        object.__setattr__(self, "up", tuple(float(c) for c in self.up))
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise GeometryError("rows and cols must be integers")
        if self.rows < 1 or self.cols < 1:
            raise GeometryError(f"rows and cols must be >= 1, got {self.rows}x{self.cols}")
        if not (self.delta_x > 0 and self.delta_y > 0):
            raise GeometryError("element size must be positive")
        n = np.asarray(self.normal)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise GeometryError(f"normal must be a unit 3-vector, got {self.normal}")
        if self.n_diodes < 0:
            raise GeometryError("n_diodes must be >= 0")
        if not 1 <= self.s_a <= 2**self.n_diodes:
            raise GeometryError(
                f"s_a must lie in [1, 2**n_diodes = {2**self.n_diodes}], got {self.s_a}"
            )
        horizontal = np.cross(np.asarray(self.up), n)
        if np.linalg.norm(horizontal) < 1e-9:
            raise GeometryError("up vector must not be parallel to the normal")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    @property
    def phase_step(self) -> float:
        return 2.0 * math.pi / self.s_a

    @cached_property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit (horizontal, vertical) in-plane axes."""
        n = np.asarray(self.normal)
        horizontal = np.cross(np.asarray(self.up), n)
        horizontal /= np.linalg.norm(horizontal)
        vertical = np.cross(n, horizontal)
        return horizontal, vertical

    @cached_property
    def element_positions(self) -> np.ndarray:
        """(M, 3) array of element centres, row-major."""
        horizontal, vertical = self.axes
        r = (np.arange(self.rows) - (self.rows - 1) / 2.0) * self.delta_y
        c = (np.arange(self.cols) - (self.cols - 1) / 2.0) * self.delta_x
        rr, cc = np.meshgrid(r, c, indexing="ij")
        pos = (
            self.center.as_array()
            + rr.reshape(-1, 1) * vertical
            + cc.reshape(-1, 1) * horizontal
        )
        pos.setflags(write=False)
        return pos

    def signed_distance(self, p: PointLike) -> float:
        return float(np.dot(_vec(p) - self.center.as_array(), self.normal))

    def with_size(self, rows: int, cols: int) -> "PanelGeometry":
        return PanelGeometry(
            rows, cols, self.delta_x, self.delta_y, self.center,
            self.normal, self.up, self.n_diodes, self.s_a,
        )


def element_position(panel: PanelGeometry, m: int) -> Point3:
    if not 0 <= m < panel.n_elements:
        raise IndexError(f"element index {m} out of range [0, {panel.n_elements})")
    return Point3.of(panel.element_positions[m])


def _angles(panel: PanelGeometry, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # v: (..., 3) vectors leaving the element
    n = np.asarray(panel.normal)
    horizontal, vertical = panel.axes
    d = np.linalg.norm(v, axis=-1)
    along = v @ n
    across = np.linalg.norm(v - along[..., None] * n, axis=-1)
    theta = np.arctan2(across, along)
    phi = np.mod(np.arctan2(v @ vertical, v @ horizontal), 2.0 * math.pi)
    return theta, phi, d


@dataclass(frozen=True)
class ElementAngles:
    """Per-element arrival/departure angles and path lengths, shape (M,) each."""

    theta_a: np.ndarray
    phi_a: np.ndarray
    theta_d: np.ndarray
    phi_d: np.ndarray
    d_src: np.ndarray
    d_dst: np.ndarray


def element_angles(panel: PanelGeometry, src: PointLike, dst: PointLike) -> ElementAngles:
    """Vectorised :func:`directions` over every element of ``panel``."""
    pos = panel.element_positions
    theta_a, phi_a, d_src = _angles(panel, _vec(src) - pos)
    theta_d, phi_d, d_dst = _angles(panel, _vec(dst) - pos)
    if np.any(d_src == 0.0) or np.any(d_dst == 0.0):
        raise GeometryError("source or destination coincides with an element")
    return ElementAngles(theta_a, phi_a, theta_d, phi_d, d_src, d_dst)


def directions(
    panel: PanelGeometry, m: int, src: PointLike, dst: PointLike
) -> tuple[Direction, Direction, float, float]:
    """Arrival direction (toward ``src``), departure direction (toward ``dst``)
    and the two path lengths for element ``m``."""
    pos = element_position(panel, m).as_array()
    vs, vd = _vec(src) - pos, _vec(dst) - pos
    if not np.any(vs) or not np.any(vd):
        raise GeometryError("source or destination coincides with the element")
    ta, pa, ds = _angles(panel, vs)
    td, pd, dd = _angles(panel, vd)
    return Direction(float(ta), float(pa)), Direction(float(td), float(pd)), float(ds), float(dd)


def side_of(panel: PanelGeometry, p: PointLike) -> Side:
    s = panel.signed_distance(p)
    if abs(s) <= _PLANE_TOL:
        raise GeometryError(f"point {p} lies on the panel plane")
    return Side.REFLECTIVE if s > 0 else Side.TRANSMISSIVE


def check_bs_side(panel: PanelGeometry, bs: PointLike) -> None:
    """The base station must sit strictly on the side the normal points to."""
    if panel.signed_distance(bs) <= _PLANE_TOL:
        raise GeometryError("panel normal must point toward the base station")
