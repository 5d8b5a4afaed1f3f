"""Closed-form link metrics and operation counts.

Three readings of the per-subchannel noise power are kept side by side
(``NOISE_VARIANTS``) together with three readings of the BPSK error
probability (``BER_VARIANTS``).  :func:`arbitrate_noise_variance` and
:func:`arbitrate_ber` pick between them with a Monte Carlo measurement, and
the selected names travel with every result as metadata.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .channel import SegmentChannel, chain_product
from .transceiver import (
    BPSK,
    Constellation,
    NoiseSpec,
    diagonal_gains,
    compensation_phases,
    propagate,
    receive_transform,
    simulate_errors,
)

__all__ = [
    "Scheme",
    "OpCount",
    "op_counts",
    "LinkBudget",
    "NOISE_VARIANTS",
    "BER_VARIANTS",
    "DEFAULT_BER_VARIANT",
    "DEFAULT_NOISE_VARIANT",
    "hop_gains",
    "overall_gains",
    "subchannel_noise_variance",
    "subchannel_noise_variances",
    "analytic_ber_bpsk",
    "capacity",
    "link_budget",
    "noise_for_snr",
    "empirical_noise_variances",
    "NoiseArbitration",
    "arbitrate_noise_variance",
    "BerArbitration",
    "arbitrate_ber",
    "binomial_halfwidth",
]

NOISE_VARIANTS = ("printed", "uniform", "unitary")
BER_VARIANTS = ("printed", "sqrt_per_n", "unitary")
DEFAULT_BER_VARIANT = "sqrt_per_n"
DEFAULT_NOISE_VARIANT = "unitary"
CAPACITY_LOG_BASE = 2


class Scheme(str, enum.Enum):
    PROPOSED_PRECODER = "proposed_precoder"
    NO_PRECODER = "no_precoder"
    FULLY_DIGITAL_PRECODER = "fully_digital_precoder"
    FAST_SYMBOLWISE_ML = "fast_symbolwise_ml"
    TRADITIONAL_ML = "traditional_ml"
    ML_WITH_FULLY_DIGITAL = "ml_with_fully_digital"
    RIS_PHASE_COMPENSATION = "ris_phase_compensation"


@dataclass(frozen=True)
class OpCount:
    complex_additions: float
    complex_multiplications: float
    phase_subtractions: int = 0

    def __post_init__(self):
        if min(self.complex_additions, self.complex_multiplications,
               self.phase_subtractions) < 0:
            raise ValueError("operation counts must be nonnegative")


def op_counts(scheme: Scheme | str, n: int, v: int) -> OpCount:
    """Operation count of one scheme for ``n`` antennas and alphabet size ``v``.

    Non-power-of-two ``n`` gives non-integer FFT counts; they are returned as
    floats.
    """
    scheme = Scheme(scheme)
    if n < 1 or v < 1:
        raise ValueError(f"need n >= 1 and v >= 1, got n={n}, v={v}")
    fft_add = n * math.log2(n)
    fft_mul = n / 2 * math.log2(n)
    if scheme is Scheme.PROPOSED_PRECODER:
        return OpCount(fft_add, fft_mul + n)
    if scheme is Scheme.NO_PRECODER:
        return OpCount(0.0, 0.0)
    if scheme is Scheme.FULLY_DIGITAL_PRECODER:
        # integer numerators keep N = 1 at exactly zero additions
        return OpCount((8 * n ** 3 - 9 * n ** 2 + n) / 6,
                       (10 * n ** 3 + 3 * n ** 2 - n) / 6)
    if scheme is Scheme.FAST_SYMBOLWISE_ML:
        return OpCount(fft_add + n * v, fft_mul + n * (v + 1))
    if scheme is Scheme.TRADITIONAL_ML:
        # exact integers; V**N overflows float only far beyond any table
        return OpCount(float(n ** 2 * v ** n), float((n ** 2 + n) * v ** n))
    if scheme is Scheme.ML_WITH_FULLY_DIGITAL:
        return OpCount(float(n * v), float(n * v))
    return OpCount(0.0, 0.0, phase_subtractions=n)


@dataclass(frozen=True, eq=False)
class LinkBudget:
    """Per-subchannel quantities entering the BER and capacity formulas.

    Attributes
    ----------
    gains : ndarray
        Overall diagonal gains ``Lambda_l``.
    noise_vars : ndarray
        Post-transform noise power ``omega_l^2`` per subchannel.
    bandwidth : float
        Bandwidth in Hz.
    symbol_powers : ndarray
        ``|s_l|^2`` per subchannel.
    """

    gains: np.ndarray
    noise_vars: np.ndarray
    bandwidth: float = 1.0
    symbol_powers: np.ndarray = field(default=None)

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=complex).ravel()
        noise = np.asarray(self.noise_vars, dtype=float).ravel()
        if noise.size == 1 and gains.size > 1:
            noise = np.full(gains.size, float(noise[0]))
        powers = (np.ones(gains.size) if self.symbol_powers is None
                  else np.asarray(self.symbol_powers, dtype=float).ravel())
        if not (gains.size == noise.size == powers.size):
            raise ValueError(f"length mismatch: gains {gains.size}, noise {noise.size}, "
                             f"powers {powers.size}")
        if np.any(noise < 0) or np.any(powers < 0):
            raise ValueError("noise and symbol powers must be nonnegative")
        if self.bandwidth < 0:
            raise ValueError("bandwidth must be nonnegative")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "noise_vars", noise)
        object.__setattr__(self, "symbol_powers", powers)

    @property
    def n(self) -> int:
        return self.gains.size

    def snr_terms(self, per_n: bool) -> np.ndarray:
        """``|Lambda|^2 |s|^2 / omega^2``, optionally divided by ``N``."""
        num = np.abs(self.gains) ** 2 * self.symbol_powers
        if np.any((self.noise_vars == 0) & (num == 0)):
            raise ValueError("subchannel with zero gain and zero noise has undefined SNR")
        with np.errstate(divide="ignore"):
            snr = np.where(num == 0, 0.0, num / self.noise_vars)
        return snr / self.n if per_n else snr


def hop_gains(hop: SegmentChannel) -> np.ndarray:
    """Diagonal of ``W^H h_hat W`` for one hop."""
    return diagonal_gains(hop.h_hat)


def overall_gains(chain: Sequence[SegmentChannel]) -> np.ndarray:
    """Diagonal gains of the circulant end-to-end product."""
    return diagonal_gains(chain_product([c.h_hat for c in chain]))


def _first_row_dft(hop: SegmentChannel) -> np.ndarray:
    # sum_u h_1u exp(-j 2 pi (l-1)(u-1) / N), l = 1..N
    return np.fft.fft(hop.h_hat[0])


def subchannel_noise_variances(chain: Sequence[SegmentChannel], noise: NoiseSpec,
                               variant: str = "printed") -> np.ndarray:
    """Post-transform noise power for every subchannel.

    ``printed`` and ``uniform`` evaluate the first-row sums of the last two
    hops with coefficients ``(1/N, 1/sqrt(N))`` and ``(1/N, 1/N)``; both need
    exactly three hops.  ``unitary`` propagates each noise source through the
    diagonal gains of the hops after it and works for any chain length.
    """
    if variant not in NOISE_VARIANTS:
        raise ValueError(f"unknown noise variant {variant!r}; choose from {NOISE_VARIANTS}")
    n = chain[-1].shape[0]
    if variant == "unitary":
        per_hop = noise.per_hop(len(chain))
        gains = [np.abs(hop_gains(c)) ** 2 for c in chain]
        total = np.zeros(n)
        for i, var in enumerate(per_hop):
            amp = np.ones(n)
            for g in gains[i + 1:]:
                amp = amp * g
            total += var * amp
        return total
    if len(chain) != 3:
        raise ValueError(f"the {variant!r} noise form is defined for 3 hops, got {len(chain)}")
    a_rr = _first_row_dft(chain[2])
    a_rRr = _first_row_dft(chain[1])
    c2 = 1 / n if variant == "uniform" else 1 / math.sqrt(n)
    return (np.abs(a_rr * a_rRr) ** 2 * noise.var_ris1 / n
            + np.abs(a_rr) ** 2 * noise.var_ris2 * c2
            + noise.var_rx)


def subchannel_noise_variance(l: int, chain: Sequence[SegmentChannel], noise: NoiseSpec,
                              variant: str = "printed") -> float:
    """Noise power of subchannel ``l`` (1-based)."""
    n = chain[-1].shape[0]
    if not 1 <= l <= n:
        raise IndexError(f"subchannel {l} out of range 1..{n}")
    return float(subchannel_noise_variances(chain, noise, variant)[l - 1])


def analytic_ber_bpsk(budget: LinkBudget, variant: str = DEFAULT_BER_VARIANT) -> float:
    """Average BPSK bit error probability over the subchannels.

    ``printed`` feeds ``|Lambda|^2 |s|^2 / (N omega^2)`` to ``erfc`` directly,
    ``sqrt_per_n`` takes its square root and ``unitary`` uses
    ``sqrt(|Lambda|^2 |s|^2 / omega^2)``.  For circularly-symmetric noise
    of power ``omega^2`` the exact coherent BPSK rate is the ``sqrt_per_n``
    form when each symbol carries ``1/N`` of the energy and the ``unitary``
    form when it carries all of it.
    """
    if variant == "printed":
        arg = budget.snr_terms(per_n=True)
    elif variant == "sqrt_per_n":
        arg = np.sqrt(budget.snr_terms(per_n=True))
    elif variant == "unitary":
        arg = np.sqrt(budget.snr_terms(per_n=False))
    else:
        raise ValueError(f"unknown BER variant {variant!r}; choose from {BER_VARIANTS}")
    return float(np.mean(0.5 * erfc(arg)))


def capacity(budget: LinkBudget) -> float:
    """``B * sum_l log2(1 + |Lambda_l|^2 |s_l|^2 / (N omega_l^2))`` in bit/s.

    The ``1/N`` splits a fixed total transmit power across the subchannels.
    """
    return float(budget.bandwidth * np.sum(np.log2(1.0 + budget.snr_terms(per_n=True))))


def noise_for_snr(gains: np.ndarray, snr_db: float, symbol_power: float = 1.0) -> NoiseSpec:
    """Equal noise power at every stage for a target SNR in dB.

    SNR is ``mean|Lambda|^2 * symbol_power`` over the receiver noise power:
    a full-energy symbol on an average subchannel.  The ``1/N`` power split
    of the BER and capacity formulas comes on top of this.
    """
    ref = float(np.mean(np.abs(gains) ** 2)) * symbol_power
    var = ref / 10 ** (snr_db / 10)
    return NoiseSpec(var, var, var)


def link_budget(chain: Sequence[SegmentChannel], noise: NoiseSpec, bandwidth: float = 1.0,
                noise_variant: str = "unitary", symbol_power: float = 1.0) -> LinkBudget:
    gains = overall_gains(chain)
    return LinkBudget(gains=gains,
                      noise_vars=subchannel_noise_variances(chain, noise, noise_variant),
                      bandwidth=bandwidth,
                      symbol_powers=np.full(gains.size, symbol_power))


def empirical_noise_variances(chain: Sequence[SegmentChannel], noise: NoiseSpec, trials: int,
                              seed=None, kind: str = "hat") -> np.ndarray:
    """Monte Carlo power of the post-transform noise on every subchannel."""
    n_in = chain[0].shape[1]
    phases = compensation_phases(chain)
    y = propagate(np.zeros((trials, n_in), dtype=complex), chain, phases, noise, seed, kind)
    y_t = receive_transform(y, chain[-1].u_left)
    return np.mean(np.abs(y_t) ** 2, axis=0)


@dataclass(frozen=True)
class NoiseArbitration:
    """Outcome of comparing the noise-power variants with Monte Carlo.

    ``errors[variant][source]`` is the worst relative deviation over
    subchannels when only ``source`` (``ris1``, ``ris2`` or ``rx``) is active.
    ``selected`` is the variant with the smallest worst-case error, or
    ``None`` if no variant is within ``rtol``.
    """

    selected: str | None
    errors: dict
    rtol: float
    trials: int


_SOURCES = (("ris1", lambda v: NoiseSpec(v, 0, 0)),
            ("ris2", lambda v: NoiseSpec(0, v, 0)),
            ("rx", lambda v: NoiseSpec(0, 0, v)))


def arbitrate_noise_variance(chain: Sequence[SegmentChannel], noise: NoiseSpec,
                             trials: int = 100_000, seed=0, rtol: float = 0.03,
                             variants: Sequence[str] = NOISE_VARIANTS) -> NoiseArbitration:
    """Pick the noise-power variant that matches a noise-only simulation.

    Each nonzero noise source is simulated on its own, so that weak sources
    are not masked by the receiver noise.
    """
    ss = np.random.SeedSequence(seed)
    powers = {"ris1": noise.var_ris1, "ris2": noise.var_ris2, "rx": noise.var_rx}
    errors = {v: {} for v in variants}
    for (name, make), child in zip(_SOURCES, ss.spawn(len(_SOURCES))):
        if powers[name] == 0:
            continue
        spec = make(powers[name])
        emp = empirical_noise_variances(chain, spec, trials, np.random.default_rng(child))
        for v in variants:
            ana = subchannel_noise_variances(chain, spec, v)
            errors[v][name] = float(np.max(np.abs(ana - emp) / emp))
    worst = {v: max(e.values(), default=0.0) for v, e in errors.items()}
    best = min(worst, key=worst.get)
    return NoiseArbitration(selected=best if worst[best] <= rtol else None,
                            errors=errors, rtol=rtol, trials=trials)


def binomial_halfwidth(p: float, n: int, z: float = 3.0) -> float:
    """``z`` standard deviations of a binomial proportion estimate."""
    return z * math.sqrt(max(p * (1 - p), 0.0) / n)


@dataclass(frozen=True)
class BerArbitration:
    selected: str | None
    simulated: float
    halfwidth: float
    analytic: dict
    trials: int


def arbitrate_ber(chain: Sequence[SegmentChannel], noise: NoiseSpec, trials: int,
                  seed=0, variants: Sequence[str] = BER_VARIANTS,
                  noise_variant: str = "unitary", kind: str = "hat",
                  omega: Constellation = BPSK, power_split: bool = True,
                  workers: int = 1) -> BerArbitration:
    """Compare each BER variant with a simulated BPSK bit error rate.

    With ``power_split`` the transmitted symbols carry ``1/N`` of the unit
    symbol energy, which is the reading behind the ``1/N`` in the formulas.
    The first variant whose prediction falls inside the 3-sigma interval of
    the simulated rate is selected.
    """
    n = chain[0].shape[1]
    scale = 1 / math.sqrt(n) if power_split else 1.0
    counts = simulate_errors(chain, omega, noise, trials, seed=seed, kind=kind,
                             symbol_scale=scale, workers=workers)
    ber = counts.bit_error_rate
    # interval from the simulated rate, floored at one error to stay nonzero
    p = max(ber, 1.0 / counts.bits)
    half = binomial_halfwidth(p, counts.bits)
    budget = link_budget(chain, noise, noise_variant=noise_variant)
    analytic = {v: analytic_ber_bpsk(budget, v) for v in variants}
    inside = [v for v in variants if abs(analytic[v] - ber) <= half]
    return BerArbitration(selected=inside[0] if inside else None, simulated=ber,
                          halfwidth=half, analytic=analytic, trials=trials)
