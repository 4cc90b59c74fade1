"""Pure-NumPy versions of the compiled hot loops in ``_speedups.pyx``.

Signatures and arithmetic order match the Cython module exactly.
"""

import numpy as np


def ftcs_step(c_in, c_out, active, lamx, lamy, j0, j1, k0, k1,
              substitute=False, eta=1.0, gamma=0.0):
    sl = (slice(j0, j1), slice(k0, k1))
    c = c_in[sl]
    e = c_in[j0 + 1:j1 + 1, k0:k1]
    w = c_in[j0 - 1:j1 - 1, k0:k1]
    n = c_in[j0:j1, k0 + 1:k1 + 1]
    s = c_in[j0:j1, k0 - 1:k1 - 1]
    mask = active[sl].view(bool)
    if substitute:
        mirror = eta * c + gamma
        e = np.where(active[j0 + 1:j1 + 1, k0:k1].view(bool), e, mirror)
        w = np.where(active[j0 - 1:j1 - 1, k0:k1].view(bool), w, mirror)
        n = np.where(active[j0:j1, k0 + 1:k1 + 1].view(bool), n, mirror)
        s = np.where(active[j0:j1, k0 - 1:k1 - 1].view(bool), s, mirror)
    new = c + lamx * ((e - 2.0 * c) + w) + lamy * ((n - 2.0 * c) + s)
    np.copyto(c_out[sl], new, where=mask)


def fill_ghosts(c_flat, targets, indptr, indices, coeffs, constants):
    if len(targets) == 0:
        return
    counts = np.diff(indptr)
    width = int(counts.max())
    # column-by-column accumulation reproduces the sequential order of the C loop
    acc = np.zeros(len(targets))
    for col in range(width):
        rows = np.nonzero(counts > col)[0]
        p = indptr[rows] + col
        acc[rows] = acc[rows] + coeffs[p] * c_flat[indices[p]]
    c_flat[targets] = acc + constants
