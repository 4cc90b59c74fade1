# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: one FTCS sweep and the ghost-point gather.

Both functions mirror :mod:`ibmdiff._pykernels` operation for operation
(same parenthesization, same summation order) so the two backends agree
bitwise when the extension is built without FMA contraction.
"""

cimport cython


def ftcs_step(const double[:, ::1] c_in, double[:, ::1] c_out,
              const unsigned char[:, ::1] active,
              double lamx, double lamy,
              Py_ssize_t j0, Py_ssize_t j1, Py_ssize_t k0, Py_ssize_t k1,
              bint substitute=False, double eta=1.0, double gamma=0.0):
    cdef Py_ssize_t j, k
    cdef double c, e, w, n, s, mirror
    with nogil:
        if not substitute:
            for j in range(j0, j1):
                for k in range(k0, k1):
                    c = c_in[j, k]
                    if active[j, k]:
                        c_out[j, k] = (c + lamx * ((c_in[j + 1, k] - 2.0 * c) + c_in[j - 1, k])
                                       + lamy * ((c_in[j, k + 1] - 2.0 * c) + c_in[j, k - 1]))
        else:
            for j in range(j0, j1):
                for k in range(k0, k1):
                    if not active[j, k]:
                        continue
                    c = c_in[j, k]
                    mirror = eta * c + gamma
                    e = c_in[j + 1, k] if active[j + 1, k] else mirror
                    w = c_in[j - 1, k] if active[j - 1, k] else mirror
                    n = c_in[j, k + 1] if active[j, k + 1] else mirror
                    s = c_in[j, k - 1] if active[j, k - 1] else mirror
                    c_out[j, k] = c + lamx * ((e - 2.0 * c) + w) + lamy * ((n - 2.0 * c) + s)


def fill_ghosts(double[::1] c_flat, const Py_ssize_t[::1] targets,
                const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices,
                const double[::1] coeffs, const double[::1] constants):
    cdef Py_ssize_t g, p
    cdef double acc
    with nogil:
        for g in range(targets.shape[0]):
            acc = 0.0
            for p in range(indptr[g], indptr[g + 1]):
                acc = acc + coeffs[p] * c_flat[indices[p]]
            c_flat[targets[g]] = acc + constants[g]
