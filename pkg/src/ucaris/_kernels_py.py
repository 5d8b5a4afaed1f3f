"""Pure NumPy versions of the detection kernels in ``_kernels.pyx``."""

import numpy as np


def nearest_symbol_indices(y, gains, symbols):
    """Index of the nearest scaled symbol, per trial and subchannel.

    ``y`` is ``(T, N)``, ``gains`` ``(N,)``, ``symbols`` ``(V,)``. Ties go to
    the lowest symbol index.
    """
    z = y[:, :, None] - gains[None, :, None] * symbols[None, None, :]
    dist = z.real ** 2 + z.imag ** 2
    return np.argmin(dist, axis=-1).astype(np.intp)


def update_best_candidates(y, outputs, best_dist, best_idx, offset):
    """Fold one block of candidate outputs into the running ML decision.

    ``outputs[k]`` is ``H @ s_k`` for candidate ``offset + k``. ``best_dist``
    and ``best_idx`` are updated in place; an earlier candidate wins ties.
    """
    z = y[:, None, :] - outputs[None, :, :]
    dist = np.sum(z.real ** 2 + z.imag ** 2, axis=-1)
    k = np.argmin(dist, axis=1)
    d = dist[np.arange(dist.shape[0]), k]
    better = d < best_dist
    best_dist[better] = d[better]
    best_idx[better] = offset + k[better]
