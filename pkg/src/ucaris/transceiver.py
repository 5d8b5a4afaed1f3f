"""Transmit and receive processing around the multi-hop channel, plus detectors.

Signal vectors may be a single vector of length ``N`` or a batch of shape
``(trials, N)``; every operation acts on the last axis.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .channel import (
    ChannelError,
    SegmentChannel,
    chain_product,
    circulant_witness,
    overall_channel,
)

__all__ = [
    "Constellation",
    "NoiseSpec",
    "BPSK",
    "QPSK",
    "CONSTELLATIONS",
    "get_constellation",
    "NonCirculantError",
    "SearchSpaceError",
    "idft_matrix",
    "dft_matrix",
    "precode",
    "ris_phase_design",
    "compensation_phases",
    "propagate",
    "receive_transform",
    "diagonal_gains",
    "first_row_gains",
    "detect_symbolwise",
    "detect_exhaustive",
    "as_rng",
    "complex_noise",
    "DETECTORS",
    "ErrorCounts",
    "block_seed",
    "simulate_errors",
]

MAX_SEARCH_SPACE = 10 ** 7


class NonCirculantError(ChannelError):
    pass


class SearchSpaceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Constellation:
    """Finite symbol alphabet with unit average energy."""

    name: str
    symbols: np.ndarray

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=complex).ravel()
        if symbols.size == 0:
            raise ValueError("constellation must not be empty")
        if len(np.unique(np.round(symbols, 12))) != symbols.size:
            raise ValueError("constellation symbols must be distinct")
        energy = float(np.mean(np.abs(symbols) ** 2))
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"constellation average energy is {energy}, expected 1")
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)

    @property
    def size(self) -> int:
        return self.symbols.size

    @property
    def bits_per_symbol(self) -> int:
        return max(1, math.ceil(math.log2(self.size)))

    @property
    def labels(self) -> np.ndarray:
        """Gray-coded bit label of each symbol index."""
        k = np.arange(self.size)
        return k ^ (k >> 1)


BPSK = Constellation("bpsk", np.array([1.0, -1.0]))
QPSK = Constellation("qpsk", np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / math.sqrt(2))
CONSTELLATIONS = {c.name: c for c in (BPSK, QPSK)}


def get_constellation(name: str) -> Constellation:
    try:
        return CONSTELLATIONS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; "
                         f"choose from {sorted(CONSTELLATIONS)}") from None


@dataclass(frozen=True)
class NoiseSpec:
    """Noise power added at each RIS and at the receiver."""

    var_ris1: float = 0.0
    var_ris2: float = 0.0
    var_rx: float = 0.0

    def __post_init__(self):
        for name in ("var_ris1", "var_ris2", "var_rx"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def per_hop(self, num_hops: int) -> list[float]:
        """Noise power added at the end of each hop.

        RIS-1 gets ``var_ris1``; every later RIS gets ``var_ris2``.
        """
        if num_hops < 1:
            raise ValueError("need at least one hop")
        ris = [self.var_ris1] + [self.var_ris2] * (num_hops - 2)
        return ris[:num_hops - 1] + [self.var_rx]

    def scaled(self, factor: float) -> "NoiseSpec":
        return NoiseSpec(self.var_ris1 * factor, self.var_ris2 * factor, self.var_rx * factor)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def complex_noise(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples of the given power."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def idft_matrix(n: int) -> np.ndarray:
    """Unitary inverse DFT, ``W[a, b] = exp(+j*2*pi*a*b/n) / sqrt(n)``."""
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)


def dft_matrix(n: int) -> np.ndarray:
    return idft_matrix(n).conj().T


def _check_len(vec: np.ndarray, n: int, what: str) -> None:
    if vec.shape[-1] != n:
        raise ValueError(f"{what} has length {vec.shape[-1]}, expected {n}")


def precode(s, u1) -> np.ndarray:
    """``x = conj(U1) W s``: unitary IDFT then the transmit phase pre-compensation."""
    s = np.asarray(s, dtype=complex)
    u1 = np.asarray(u1)
    _check_len(s, u1.shape[0], "symbol vector")
    n = s.shape[-1]
    return np.conj(u1) * np.fft.ifft(s, axis=-1) * math.sqrt(n)


def ris_phase_design(u_right_next, u_left_prev) -> np.ndarray:
    """Reflection phases cancelling the two diagonals that meet at a RIS."""
    a, b = np.asarray(u_right_next), np.asarray(u_left_prev)
    if a.shape != b.shape:
        raise ValueError(f"diagonal lengths differ: {a.shape} vs {b.shape}")
    return np.conj(a) * np.conj(b)


def compensation_phases(chain: Sequence[SegmentChannel]) -> list[np.ndarray]:
    """One compensation per RIS, for every junction of ``chain``."""
    return [ris_phase_design(nxt.u_right, prev.u_left)
            for prev, nxt in zip(chain[:-1], chain[1:])]


def propagate(x, chain: Sequence[SegmentChannel], phases: Sequence[np.ndarray],
              noise: NoiseSpec, rng_seed=None, kind: str = "approx") -> np.ndarray:
    """Send ``x`` through every hop.

    Each hop applies its matrix and adds its noise; a RIS then applies its
    reflection phases to the noisy incident signal.
    """
    if len(phases) != len(chain) - 1:
        raise ChannelError(f"expected {len(chain) - 1} RIS phase vectors, got {len(phases)}")
    rng = as_rng(rng_seed)
    sig = np.asarray(x, dtype=complex)
    variances = noise.per_hop(len(chain))
    for i, (hop, var) in enumerate(zip(chain, variances)):
        h = hop.matrix(kind)
        _check_len(sig, h.shape[1], f"input to hop {i + 1}")
        sig = sig @ h.T
        if var > 0:
            sig = sig + complex_noise(rng, sig.shape, var)
        if i < len(phases):
            ph = np.asarray(phases[i])
            _check_len(sig, ph.shape[0], f"RIS {i + 1} incident signal")
            sig = sig * ph
    return sig


def receive_transform(y, u6) -> np.ndarray:
    """``W^H conj(U6) y``: receive phase compensation then unitary DFT."""
    y = np.asarray(y, dtype=complex)
    u6 = np.asarray(u6)
    _check_len(y, u6.shape[0], "receive vector")
    n = y.shape[-1]
    return np.fft.fft(np.conj(u6) * y, axis=-1) / math.sqrt(n)


def diagonal_gains(h_hat_product, tol: float = 1e-8) -> np.ndarray:
    """Diagonal of ``W^H M W`` for a circulant ``M``.

    Raises :class:`NonCirculantError` when ``M`` deviates from circulant by
    more than ``tol`` (relative).
    """
    m = np.asarray(h_hat_product, dtype=complex)
    dev = circulant_witness(m).max_shift_deviation
    if dev > tol:
        raise NonCirculantError(
            f"matrix is not circulant: relative shift deviation {dev:.3e} > {tol:.1e}")
    w = idft_matrix(m.shape[0])
    return np.einsum("ai,ab,bi->i", w.conj(), m, w)


def first_row_gains(first_row) -> np.ndarray:
    """``sum_n h_1n exp(-j*2*pi*(i-1)*(n-1)/N) / sqrt(N)`` computed literally.

    Relation to :func:`diagonal_gains` of the circulant with that first row:
    ``diagonal_gains[i] == sqrt(N) * first_row_gains[(-i) % N]``.
    """
    row = np.asarray(first_row, dtype=complex)
    return np.fft.fft(row) / math.sqrt(row.size)


def _symbolwise_indices(y_tilde: np.ndarray, gains: np.ndarray,
                        omega: Constellation) -> np.ndarray:
    g = np.ascontiguousarray(gains, dtype=complex)
    _check_len(y_tilde, g.shape[0], "y_tilde")
    batch = np.ascontiguousarray(np.atleast_2d(y_tilde), dtype=complex)
    return kernels.nearest_symbol_indices(batch, g, omega.symbols)


def detect_symbolwise(y_tilde, gains, omega: Constellation) -> np.ndarray:
    """Per-subchannel nearest-symbol decision, ties to the lowest symbol index."""
    yt = np.asarray(y_tilde, dtype=complex)
    out = omega.symbols[_symbolwise_indices(yt, gains, omega)]
    return out if yt.ndim > 1 else out[0]


def _digits(v: int, n: int, idx: np.ndarray) -> np.ndarray:
    # lexicographic order: the first symbol index is the most significant digit
    k = np.array(idx, dtype=np.intp)
    digits = np.empty((k.size, n), dtype=np.intp)
    for pos in range(n - 1, -1, -1):
        digits[:, pos] = k % v
        k = k // v
    return digits


def _candidates(omega: Constellation, n: int, idx: np.ndarray) -> np.ndarray:
    return omega.symbols[_digits(omega.size, n, idx)]


def _exhaustive_indices(y: np.ndarray, h: np.ndarray, omega: Constellation,
                        block: int = 4096) -> np.ndarray:
    """Symbol indices ``(T, N)`` of the ML decision for each row of ``y``."""
    _check_len(y, h.shape[0], "receive vector")
    n = h.shape[1]
    total = omega.size ** n
    if total > MAX_SEARCH_SPACE:
        raise SearchSpaceError(
            f"exhaustive search over {omega.size}^{n} = {total} candidates exceeds "
            f"{MAX_SEARCH_SPACE}; use the symbol-wise detector on the diagonalised system")
    batch = np.ascontiguousarray(np.atleast_2d(y), dtype=complex)
    best_dist = np.full(batch.shape[0], np.inf)
    best_idx = np.zeros(batch.shape[0], dtype=np.intp)
    for start in range(0, total, block):
        stop = min(start + block, total)
        outputs = np.ascontiguousarray(_candidates(omega, n, np.arange(start, stop)) @ h.T)
        kernels.update_best_candidates(batch, outputs, best_dist, best_idx, start)
    return _digits(omega.size, n, best_idx)


def detect_exhaustive(y, h, omega: Constellation, block: int = 4096) -> np.ndarray:
    """``argmin over Omega^N of ||y - H s||^2``; earliest candidate wins ties.

    Candidates are ordered lexicographically by symbol index, first entry
    most significant, as :func:`itertools.product` would list them.
    """
    y = np.asarray(y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    out = omega.symbols[_exhaustive_indices(y, h, omega, block)]
    return out if y.ndim > 1 else out[0]


DETECTORS = ("proposed", "traditional_ml", "uncompensated_ml")


@dataclass(frozen=True)
class ErrorCounts:
    bit_errors: int
    bits: int
    symbol_errors: int
    symbols: int

    @property
    def bit_error_rate(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def symbol_error_rate(self) -> float:
        return self.symbol_errors / self.symbols if self.symbols else 0.0

    def __add__(self, other: "ErrorCounts") -> "ErrorCounts":
        return ErrorCounts(self.bit_errors + other.bit_errors, self.bits + other.bits,
                           self.symbol_errors + other.symbol_errors,
                           self.symbols + other.symbols)


def block_seed(seed, *key: int) -> np.random.SeedSequence:
    """Child seed for ``key`` without mutating any shared state."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(key))


def simulate_errors(chain: Sequence[SegmentChannel], omega: Constellation, noise: NoiseSpec,
                    trials: int, seed=None, detector: str = "proposed", kind: str = "approx",
                    symbol_scale: float = 1.0, block: int = 2000,
                    workers: int = 1) -> ErrorCounts:
    """Monte Carlo symbol and bit error counts of one detection scheme.

    Trials run in blocks of ``block``; block ``b`` draws from
    ``block_seed(seed, b)``, so the counts do not depend on ``workers`` and
    two detectors run with one seed see identical symbols and noise.

    Parameters
    ----------
    detector : str
        ``proposed`` (precoder, RIS compensation and symbol-wise detection),
        ``traditional_ml`` (same transmission, exhaustive ML on the
        compensated effective channel) or ``uncompensated_ml`` (raw symbols,
        reflect-only RISs, exhaustive ML on the bare channel product).
    kind : str
        Hop model used for propagation; see :meth:`SegmentChannel.matrix`.
    symbol_scale : float
        Amplitude applied to every transmitted symbol.
    """
    if detector not in DETECTORS:
        raise ValueError(f"unknown detector {detector!r}; choose from {DETECTORS}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = chain[0].shape[1]
    u1, u_last = chain[0].u_right, chain[-1].u_left
    if detector == "uncompensated_ml":
        phases = [np.ones(c.shape[0], dtype=complex) for c in chain[:-1]]
        h_eff = overall_channel(chain, phases, kind) * symbol_scale
    else:
        phases = compensation_phases(chain)
    if detector == "proposed":
        gains = diagonal_gains(chain_product([c.h_hat for c in chain])) * symbol_scale
    elif detector == "traditional_ml":
        h_eff = overall_channel(chain, phases, kind) @ (np.conj(u1)[:, None] * idft_matrix(n))
        h_eff = h_eff * symbol_scale
    labels = omega.labels

    def run(b: int) -> ErrorCounts:
        t = min(block, trials - b * block)
        rng = np.random.default_rng(block_seed(seed, b))
        idx = rng.integers(omega.size, size=(t, n))
        s = omega.symbols[idx] * symbol_scale
        x = s if detector == "uncompensated_ml" else precode(s, u1)
        y = propagate(x, chain, phases, noise, rng, kind)
        if detector == "proposed":
            est = _symbolwise_indices(receive_transform(y, u_last), gains, omega)
        else:
            est = _exhaustive_indices(y, h_eff, omega)
        diff = labels[idx] ^ labels[est]
        bit_err = int(np.sum(np.unpackbits(diff.astype(np.uint8)[..., None], axis=-1)))
        return ErrorCounts(bit_err, t * n * omega.bits_per_symbol,
                           int(np.count_nonzero(idx != est)), t * n)

    nblocks = -(-trials // block)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(nblocks)))
    else:
        parts = [run(b) for b in range(nblocks)]
    total = ErrorCounts(0, 0, 0, 0)
    for p in parts:
        total = total + p
    return total
