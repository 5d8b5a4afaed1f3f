"""UCA element geometry and the phase-term decomposition of one hop.

Every hop links two uniform circular arrays (UCAs). One of them lies in the
``xy`` plane of the hop's coordinate frame (the *in-plane* array); the other is
tilted by two rotation angles and translated to the far end of the hop (the
*off-plane* array).  The squared element-to-element distance splits as::

    d_mn^2 = d^2 + R^2 + r^2 + 2 E_n + 2 D_mn + 2 F_m

where ``E`` depends only on the off-plane element, ``F`` only on the in-plane
element and ``D`` on both.  ``D`` further splits into a part that depends on
the index *difference* (``d_hat``, circulant) and a part that depends on the
index *sum* (``d_tilde``, anti-circulant) which vanishes without rotation.

Indices are 1-based throughout the public API.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "GeometryError",
    "Side",
    "Plane",
    "UcaSpec",
    "SegmentGeometry",
    "PhaseTerms",
    "ChiAngles",
    "MAX_ROTATION",
    "rotation_matrix_x",
    "rotation_matrix_y",
    "element_position",
    "element_positions",
    "exact_distance",
    "exact_distances",
    "phase_terms",
    "phase_term_arrays",
    "chi_angles",
    "approx_distance",
]

#: Rotation bound imposed by the three-sector radiation profile.
MAX_ROTATION = math.pi / 3


class GeometryError(ValueError):
    """Invalid or degenerate geometry."""


class Side(str, enum.Enum):
    """Which end of the hop carries the tilted (off-plane) array.

    ``TRANSMIT``: the off-plane array is the hop's source (transmitter to
    RIS-1).  ``RECEIVE``: the off-plane array is the hop's sink (RIS-1 to
    RIS-2, RIS-2 to receiver).  The side also fixes the sign of the
    ``cos(phi)`` addends of ``E``.
    """

    TRANSMIT = "transmit"
    RECEIVE = "receive"

    @property
    def sign(self) -> int:
        return 1 if self is Side.TRANSMIT else -1


class Plane(str, enum.Enum):
    OFF_PLANE = "off_plane"
    IN_PLANE = "in_plane"


@dataclass(frozen=True)
class UcaSpec:
    """A uniform circular array: ``num_elements`` points on a circle.

    Element ``n`` sits at azimuth ``2*pi*(n-1)/num_elements + alpha``.
    """

    radius: float
    num_elements: int
    alpha: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"UCA radius must be positive, got {self.radius!r}")
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise GeometryError(
                f"num_elements must be a positive integer, got {self.num_elements!r}")
        if not 0.0 <= self.alpha < 2 * math.pi:
            raise GeometryError(f"alpha must lie in [0, 2*pi), got {self.alpha!r}")

    def azimuths(self) -> np.ndarray:
        n = np.arange(self.num_elements)
        return 2 * np.pi * n / self.num_elements + self.alpha


@dataclass(frozen=True)
class SegmentGeometry:
    """Geometry of one hop.

    Parameters
    ----------
    source, sink : UcaSpec
        Arrays at the two ends; signals travel from ``source`` to ``sink``.
    center_distance : float
        Distance between the two array centres in metres.
    theta, phi : float
        Azimuth and polar angle (from the plane normal) of the off-plane
        array's centre as seen from the in-plane array's centre.
    rot_x, rot_y : float
        Tilt angles of the off-plane array, applied through
        :func:`rotation_matrix_x` and :func:`rotation_matrix_y`.
    side : Side
        Which end is off-plane.
    """

    source: UcaSpec
    sink: UcaSpec
    center_distance: float
    theta: float = 0.0
    phi: float = 0.0
    rot_x: float = 0.0
    rot_y: float = 0.0
    side: Side = Side.TRANSMIT

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if not self.center_distance >= 0:
            raise GeometryError(f"center_distance must be >= 0, got {self.center_distance!r}")
        # tolerance absorbs degree -> radian round-off of 60 degrees
        for name in ("rot_x", "rot_y"):
            value = getattr(self, name)
            if abs(value) > MAX_ROTATION + 1e-12:
                raise GeometryError(f"|{name}| = {abs(value):.6g} exceeds pi/3")
        if not 0.0 <= self.phi < math.pi / 2:
            raise GeometryError(f"phi must lie in [0, pi/2), got {self.phi!r}")

    @property
    def off_plane(self) -> UcaSpec:
        return self.source if self.side is Side.TRANSMIT else self.sink

    @property
    def in_plane(self) -> UcaSpec:
        return self.sink if self.side is Side.TRANSMIT else self.source

    @property
    def reference_distance(self) -> float:
        """``sqrt(d^2 + R^2 + r^2)``, the expansion point of every hop formula."""
        return math.sqrt(self.center_distance ** 2
                         + self.off_plane.radius ** 2
                         + self.in_plane.radius ** 2)

    def with_rotation(self, rot_x: float, rot_y: float) -> "SegmentGeometry":
        return replace(self, rot_x=rot_x, rot_y=rot_y)


@dataclass(frozen=True)
class PhaseTerms:
    e_term: float
    d_term: float
    f_term: float
    d_hat: float
    d_tilde: float


@dataclass(frozen=True)
class ChiAngles:
    chi1: float
    chi2: float | None  # None when cos(rot_x)*cos(rot_y) == 1


def rotation_matrix_x(angle: float) -> np.ndarray:
    """Direction cosine matrix for a rotation about the x axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0],
                     [0.0, c, s],
                     [0.0, -s, c]])


def rotation_matrix_y(angle: float) -> np.ndarray:
    """Direction cosine matrix for a rotation about the y axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, -s],
                     [0.0, 1.0, 0.0],
                     [s, 0.0, c]])


def _off_plane_rotation(seg: SegmentGeometry) -> np.ndarray:
    # A transmit-side array faces the opposite way, so its tilt is mirrored.
    s = -1.0 if seg.side is Side.TRANSMIT else 1.0
    return (rotation_matrix_x(s * seg.rot_x) @ rotation_matrix_y(s * seg.rot_y)).T


def _off_plane_center(seg: SegmentGeometry) -> np.ndarray:
    d, th, ph = seg.center_distance, seg.theta, seg.phi
    return d * np.array([math.sin(ph) * math.cos(th),
                         math.sin(ph) * math.sin(th),
                         math.cos(ph)])


def _check_index(uca: UcaSpec, index: int, label: str) -> None:
    if not 1 <= index <= uca.num_elements:
        raise GeometryError(
            f"{label} index {index} out of range 1..{uca.num_elements}")


def element_positions(seg: SegmentGeometry, which: Plane | str) -> np.ndarray:
    """Coordinates of every element of one array, shape ``(N, 3)``."""
    which = Plane(which)
    uca = seg.off_plane if which is Plane.OFF_PLANE else seg.in_plane
    az = uca.azimuths()
    flat = uca.radius * np.stack([np.cos(az), np.sin(az), np.zeros_like(az)], axis=1)
    if which is Plane.IN_PLANE:
        return flat
    return flat @ _off_plane_rotation(seg).T + _off_plane_center(seg)


def element_position(seg: SegmentGeometry, which: Plane | str, index: int) -> np.ndarray:
    which = Plane(which)
    uca = seg.off_plane if which is Plane.OFF_PLANE else seg.in_plane
    _check_index(uca, index, which.value)
    return element_positions(seg, which)[index - 1]


def exact_distances(seg: SegmentGeometry) -> np.ndarray:
    """Distances ``[m-1, n-1]`` between in-plane element m and off-plane element n."""
    diff = (element_positions(seg, Plane.IN_PLANE)[:, None, :]
            - element_positions(seg, Plane.OFF_PLANE)[None, :, :])
    return np.sqrt(np.einsum("mnk,mnk->mn", diff, diff))


def exact_distance(seg: SegmentGeometry, m: int, n: int) -> float:
    _check_index(seg.in_plane, m, "in-plane")
    _check_index(seg.off_plane, n, "off-plane")
    diff = element_position(seg, Plane.IN_PLANE, m) - element_position(seg, Plane.OFF_PLANE, n)
    return float(np.linalg.norm(diff))


def chi_angles(rot_x: float, rot_y: float, side: Side | str = Side.RECEIVE) -> ChiAngles:
    """Phase offsets of the circulant and anti-circulant parts of ``D``.

    ``side`` is accepted for symmetry with the hop API; the mirrored tilt of a
    transmit-side array flips both angles, which leaves every product that
    enters ``chi`` unchanged.
    """
    Side(side)
    cx, cy = math.cos(rot_x), math.cos(rot_y)
    ss = math.sin(rot_x) * math.sin(rot_y)
    plus = 1.0 + cx * cy
    chi1 = math.atan2(ss / plus, (cx + cy) / plus)
    minus = 1.0 - cx * cy
    if minus == 0.0:
        return ChiAngles(chi1, None)
    chi2 = math.atan2(ss / minus, (cy - cx) / minus)
    return ChiAngles(chi1, chi2)


def phase_term_arrays(seg: SegmentGeometry) -> dict[str, np.ndarray]:
    """Vectorised phase terms.

    Returns a dict with ``e`` (off-plane, length N), ``f`` (in-plane,
    length M) and ``d``, ``d_hat``, ``d_tilde`` of shape ``(M, N)`` indexed
    ``[in-plane, off-plane]``.
    """
    off, inn = seg.off_plane, seg.in_plane
    R, r, d = off.radius, inn.radius, seg.center_distance
    a = off.azimuths()[None, :]
    b = inn.azimuths()[:, None]
    cx, sx = math.cos(seg.rot_x), math.sin(seg.rot_x)
    cy, sy = math.cos(seg.rot_y), math.sin(seg.rot_y)
    sph, cph = math.sin(seg.phi), math.cos(seg.phi)
    cth, sth = math.cos(seg.theta), math.sin(seg.theta)
    ca, sa = np.cos(a[0]), np.sin(a[0])

    e = d * R * (sph * cth * ca * cy
                 + sph * sth * sa * cx
                 + sph * cth * sa * sx * sy
                 + seg.side.sign * cph * (ca * sy - sa * sx * cy))
    f = -d * r * sph * np.cos(b[:, 0] - seg.theta)
    dd = -R * r * (np.cos(a) * np.cos(b) * cy
                   + np.sin(a) * np.sin(b) * cx
                   + np.sin(a) * np.cos(b) * sx * sy)

    chi = chi_angles(seg.rot_x, seg.rot_y, seg.side)
    d_hat = -0.5 * R * r * (1.0 + cx * cy) * np.cos(a - b - chi.chi1)
    if chi.chi2 is None:
        d_tilde = np.zeros_like(d_hat)
    else:
        d_tilde = -0.5 * R * r * (1.0 - cx * cy) * np.cos(a + b - chi.chi2)
    return {"e": e, "f": f, "d": dd, "d_hat": d_hat, "d_tilde": d_tilde}


def phase_terms(seg: SegmentGeometry, m: int, n: int) -> PhaseTerms:
    """Phase terms for in-plane element ``m`` and off-plane element ``n``."""
    _check_index(seg.in_plane, m, "in-plane")
    _check_index(seg.off_plane, n, "off-plane")
    t = phase_term_arrays(seg)
    i, j = m - 1, n - 1
    return PhaseTerms(e_term=float(t["e"][j]),
                      d_term=float(t["d"][i, j]),
                      f_term=float(t["f"][i]),
                      d_hat=float(t["d_hat"][i, j]),
                      d_tilde=float(t["d_tilde"][i, j]))


def approx_distance(seg: SegmentGeometry, m: int, n: int) -> float:
    """First-order far-field distance, ``d_ref + (E + D + F) / d_ref``."""
    t = phase_terms(seg, m, n)
    ref = seg.reference_distance
    return ref + (t.e_term + t.d_term + t.f_term) / ref
