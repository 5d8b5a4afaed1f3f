"""Search for the rotation angles that keep a hop nearly circulant.

The search locates the boundary of ``{(a, b) : eps(a, b) <= rho}`` in two
stages: a bisection along the diagonal ``a == b`` and then, with one axis held
at the diagonal value, a bisection along each axis.  Each bisection assumes
``eps`` is nondecreasing on the path it samples.  That assumption is checked on
the points actually evaluated; when it fails the stage is redone as a grid
scan and the result says so.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import epsilon_segment
from .geometry import MAX_ROTATION, SegmentGeometry

__all__ = ["AngleRange", "epsilon_at", "find_angle_range", "DEFAULT_RESOLUTION"]

DEFAULT_RESOLUTION = 1e-3
# relative slack when checking that sampled errors never decrease
_MONOTONE_RTOL = 1e-9


@dataclass(frozen=True)
class AngleRange:
    """Result of :func:`find_angle_range`.

    Attributes
    ----------
    diagonal : float
        Largest ``a`` with ``eps(a, a) <= threshold``.
    max_rot_x, max_rot_y : float
        Largest angle on one axis with the other axis held at ``diagonal``.
    threshold : float
        The error budget ``rho``.
    achieved_error : float
        Largest re-evaluated error over the three returned corner points.
    method : str
        ``"bisection"`` or ``"grid"`` if any stage had to fall back.
    evaluations : int
        Number of error evaluations spent.
    """

    diagonal: float
    max_rot_x: float
    max_rot_y: float
    threshold: float
    achieved_error: float
    method: str
    evaluations: int


def _check_angle(name: str, value: float) -> None:
    if not 0.0 <= value <= MAX_ROTATION + 1e-12:
        raise ValueError(f"{name} must lie in [0, pi/3], got {value!r}")


def epsilon_at(rot_x: float, rot_y: float, base: SegmentGeometry,
               wavelength: float, beta: float) -> float:
    """Circulant-approximation error of ``base`` tilted to ``(rot_x, rot_y)``."""
    _check_angle("rot_x", rot_x)
    _check_angle("rot_y", rot_y)
    return epsilon_segment(base.with_rotation(rot_x, rot_y), wavelength, beta)


class _NotMonotone(Exception):
    pass


def _bisect(f: Callable[[float], float], lo: float, hi: float, rho: float,
            resolution: float, f_lo: float) -> float:
    """Largest feasible point of a nondecreasing ``f`` on ``[lo, hi]``.

    ``f(lo) <= rho`` is assumed. Raises :class:`_NotMonotone` when two sampled
    points contradict monotonicity.
    """
    samples = [(lo, f_lo)]
    f_hi = f(hi)
    samples.append((hi, f_hi))
    if f_hi <= rho:
        _check_monotone(samples)
        return hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        val = f(mid)
        samples.append((mid, val))
        if val <= rho:
            lo = mid
        else:
            hi = mid
    _check_monotone(samples)
    return lo


def _check_monotone(samples: list[tuple[float, float]]) -> None:
    vals = [v for _, v in sorted(samples)]
    for a, b in zip(vals, vals[1:]):
        if b < a - _MONOTONE_RTOL * max(abs(a), 1e-300):
            raise _NotMonotone


def _grid_scan(f: Callable[[float], float], lo: float, hi: float, rho: float,
               resolution: float, workers: int) -> float:
    """Last grid point of the feasible run that starts at ``lo``."""
    steps = max(1, math.ceil((hi - lo) / resolution))
    grid = np.linspace(lo, hi, steps + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(f, grid))
    else:
        vals = [f(a) for a in grid]
    best = lo
    for a, v in zip(grid, vals):
        if v > rho:
            break
        best = float(a)
    return best


def find_angle_range(threshold: float, base: SegmentGeometry, wavelength: float,
                     beta: float, resolution: float = DEFAULT_RESOLUTION,
                     workers: int = 1) -> AngleRange:
    """Largest rotation angles of ``base`` whose error stays within ``threshold``.

    Parameters
    ----------
    threshold : float
        Error budget ``rho >= 0``.
    base : SegmentGeometry
        Hop whose rotation angles are varied; everything else is kept.
    wavelength, beta : float
        Channel constants.
    resolution : float
        Width at which each bisection stops, in radians.
    workers : int
        Threads used by the grid-scan fallback.
    """
    if not threshold >= 0:
        raise ValueError(f"threshold must be >= 0, got {threshold!r}")
    if not resolution > 0:
        raise ValueError(f"resolution must be > 0, got {resolution!r}")

    count = 0

    def eps(rx: float, ry: float) -> float:
        nonlocal count
        count += 1
        return epsilon_at(min(rx, MAX_ROTATION), min(ry, MAX_ROTATION), base, wavelength, beta)

    method = "bisection"

    def boundary(f: Callable[[float], float], lo: float) -> float:
        nonlocal method
        f_lo = f(lo)
        if f_lo > threshold:
            return lo
        try:
            return _bisect(f, lo, MAX_ROTATION, threshold, resolution, f_lo)
        except _NotMonotone:
            method = "grid"
            return _grid_scan(f, lo, MAX_ROTATION, threshold, resolution, workers)

    diag = boundary(lambda a: eps(a, a), 0.0)
    max_x = boundary(lambda a: eps(a, diag), diag)
    max_y = boundary(lambda a: eps(diag, a), diag)

    achieved = max(eps(diag, diag), eps(max_x, diag), eps(diag, max_y))
    return AngleRange(diagonal=diag, max_rot_x=max_x, max_rot_y=max_y,
                      threshold=threshold, achieved_error=achieved,
                      method=method, evaluations=count)
