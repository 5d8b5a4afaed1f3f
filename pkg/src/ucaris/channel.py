"""Per-hop channel matrices and their circulant-approximation error.

Matrices are oriented ``[sink element, source element]`` so propagation is
left multiplication: a chain ``[hop1, hop2, hop3]`` yields ``H3 @ H2 @ H1``.
Diagonal unitary matrices are stored as 1-D arrays of their diagonals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import SegmentGeometry, Side, exact_distances, phase_term_arrays

__all__ = [
    "ChannelError",
    "DegenerateGeometryError",
    "SegmentChannel",
    "CirculantWitness",
    "gain_exact",
    "build_segment",
    "build_chain",
    "epsilon_segment",
    "overall_channel",
    "chain_product",
    "epsilon_total",
    "circulant_witness",
]


class ChannelError(ValueError):
    pass


class DegenerateGeometryError(ChannelError):
    pass


def _wrapped_phase(x: np.ndarray | float) -> np.ndarray | float:
    # 2*pi*x reduced modulo 2*pi before scaling, keeps d/lambda ~ 1e3 accurate
    return 2 * np.pi * np.mod(x, 1.0)


def _free_space(distance, wavelength: float, beta: float):
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise DegenerateGeometryError("element distance must be positive")
    return beta * wavelength * np.exp(-1j * _wrapped_phase(distance / wavelength)) \
        / (4 * np.pi * distance)


def gain_exact(distance: float, wavelength: float, beta: float) -> complex:
    """Free-space LOS gain ``beta*lambda*exp(-j*2*pi*d/lambda) / (4*pi*d)``."""
    return complex(_free_space(distance, wavelength, beta))


@dataclass(frozen=True, eq=False)
class SegmentChannel:
    """All matrices of one hop.

    ``h_approx == diag(u_left) @ h_tilde @ diag(u_right)`` by construction;
    ``h_hat`` is ``h_tilde`` with the anti-circulant residual dropped.
    """

    geometry: SegmentGeometry
    wavelength: float
    beta: float
    h_exact: np.ndarray
    h_approx: np.ndarray
    u_left: np.ndarray
    u_right: np.ndarray
    h_tilde: np.ndarray
    h_hat: np.ndarray
    prefactor: complex

    @property
    def shape(self) -> tuple[int, int]:
        return self.h_approx.shape

    def matrix(self, kind: str = "approx") -> np.ndarray:
        """Hop matrix of the requested model.

        ``exact`` uses true distances, ``approx`` the far-field expansion and
        ``hat`` the circulant model ``U_left @ h_hat @ U_right``.
        """
        if kind == "exact":
            return self.h_exact
        if kind == "approx":
            return self.h_approx
        if kind == "hat":
            return self.u_left[:, None] * self.h_hat * self.u_right[None, :]
        raise ValueError(f"unknown channel model {kind!r}")


def build_segment(seg: SegmentGeometry, wavelength: float, beta: float) -> SegmentChannel:
    terms = phase_term_arrays(seg)
    ref = seg.reference_distance
    if ref <= 0:
        raise DegenerateGeometryError("hop reference distance is zero")
    k_ref = 2 * np.pi / wavelength / ref

    dist = exact_distances(seg)
    d, d_hat = terms["d"], terms["d_hat"]
    e_phase = np.exp(-1j * k_ref * terms["e"])
    f_phase = np.exp(-1j * k_ref * terms["f"])
    if seg.side is Side.RECEIVE:
        # arrays are indexed [in-plane, off-plane]; the sink is off-plane here
        dist, d, d_hat = dist.T, d.T, d_hat.T
        u_left, u_right = e_phase, f_phase
    else:
        u_left, u_right = f_phase, e_phase

    prefactor = complex(beta * wavelength * np.exp(-1j * _wrapped_phase(ref / wavelength))
                        / (4 * np.pi * ref))
    h_tilde = prefactor * np.exp(-1j * k_ref * d)
    h_hat = prefactor * np.exp(-1j * k_ref * d_hat)
    h_approx = u_left[:, None] * h_tilde * u_right[None, :]
    return SegmentChannel(
        geometry=seg,
        wavelength=wavelength,
        beta=beta,
        h_exact=_free_space(dist, wavelength, beta),
        h_approx=h_approx,
        u_left=u_left,
        u_right=u_right,
        h_tilde=h_tilde,
        h_hat=h_hat,
        prefactor=prefactor,
    )


def build_chain(segments: Sequence[SegmentGeometry], wavelength: float,
                beta: float) -> list[SegmentChannel]:
    return [build_segment(s, wavelength, beta) for s in segments]


def _rel_err2(ref: np.ndarray, approx: np.ndarray) -> float:
    den = float(np.sum(np.abs(ref) ** 2))
    if den == 0.0:
        raise ChannelError("reference matrix is identically zero")
    return float(np.sum(np.abs(approx - ref) ** 2)) / den


def epsilon_segment(seg: SegmentGeometry, wavelength: float, beta: float) -> float:
    """Relative squared error of dropping the anti-circulant residual on one hop."""
    ch = build_segment(seg, wavelength, beta)
    return _rel_err2(ch.h_tilde, ch.h_hat)


def chain_product(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """``M_last @ ... @ M_first`` for matrices listed in propagation order."""
    if not matrices:
        raise ChannelError("empty chain")
    out = matrices[0]
    for m in matrices[1:]:
        if m.shape[1] != out.shape[0]:
            raise ChannelError(f"cannot chain {m.shape} after {out.shape}")
        out = m @ out
    return out


def overall_channel(chain: Sequence[SegmentChannel], ris_phase_mats: Sequence[np.ndarray],
                    kind: str = "approx") -> np.ndarray:
    """Hop matrices interleaved with the RIS reflection diagonals.

    ``ris_phase_mats[i]`` is applied between hop ``i`` and hop ``i+1``.
    """
    if not chain:
        raise ChannelError("chain must contain at least one segment")
    if len(ris_phase_mats) != len(chain) - 1:
        raise ChannelError(
            f"expected {len(chain) - 1} RIS phase matrices, got {len(ris_phase_mats)}")
    out = chain[0].matrix(kind)
    for phases, seg in zip(ris_phase_mats, chain[1:]):
        phases = np.asarray(phases)
        if phases.ndim == 2:
            phases = np.diag(phases)
        if phases.shape[0] != out.shape[0]:
            raise ChannelError(
                f"RIS phase vector of length {phases.shape[0]} does not match "
                f"{out.shape[0]} incident signals")
        h = seg.matrix(kind)
        if h.shape[1] != phases.shape[0]:
            raise ChannelError(f"hop with {h.shape[1]} inputs cannot follow "
                               f"{phases.shape[0]} RIS elements")
        out = h @ (phases[:, None] * out)
    return out


def epsilon_total(chain: Sequence[SegmentChannel]) -> float:
    """End-to-end relative squared error of the circulant approximation."""
    tilde = chain_product([c.h_tilde for c in chain])
    hat = chain_product([c.h_hat for c in chain])
    return _rel_err2(tilde, hat)


@dataclass(frozen=True)
class CirculantWitness:
    a_t: float | None
    a_r: float | None
    max_shift_deviation: float


def _shift_amplitude(ch: SegmentChannel) -> float:
    seg = ch.geometry
    n = seg.in_plane.num_elements
    big_r, r = seg.off_plane.radius, seg.in_plane.radius
    plus = 1.0 + math.cos(seg.rot_x) * math.cos(seg.rot_y)
    return (math.sqrt(1.0 - math.cos(2 * math.pi / n)) * big_r * r * plus
            / (math.sqrt(2.0) * seg.reference_distance))


def circulant_witness(matrix: np.ndarray,
                      chain: Sequence[SegmentChannel] | None = None) -> CirculantWitness:
    """Largest deviation of any entry from its cyclic diagonal successor.

    The deviation is relative to the largest entry modulus. When ``chain`` is
    given, the shift amplitudes of its first and last hop are reported too.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ChannelError(f"circulant check needs a square matrix, got {matrix.shape}")
    shifted = np.roll(matrix, shift=(-1, -1), axis=(0, 1))
    scale = float(np.max(np.abs(matrix)))
    dev = float(np.max(np.abs(matrix - shifted))) / scale if scale > 0 else 0.0
    a_t = a_r = None
    if chain:
        a_t, a_r = _shift_amplitude(chain[0]), _shift_amplitude(chain[-1])
    return CirculantWitness(a_t=a_t, a_r=a_r, max_shift_deviation=dev)
