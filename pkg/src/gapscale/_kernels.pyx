# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: orbit enumeration, flip tables, matrix-free hopping, Metropolis.

Every function here has a numpy twin in ``_fallback`` with the same signature
and the same results; ``gapscale._core`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from libc.stdint cimport int8_t, int32_t, int64_t, uint64_t

cnp.import_array()


cdef inline uint64_t _rotl(uint64_t s, int shift, int nbits, uint64_t mask) noexcept nogil:
    if shift == 0:
        return s
    return ((s << shift) | (s >> (nbits - shift))) & mask


cdef inline uint64_t _canonical(uint64_t s, int L, int cell, int nbits, uint64_t mask,
                                int* shift_out) noexcept nogil:
    cdef uint64_t best = s, t = s
    cdef int j, best_j = 0
    for j in range(1, L):
        t = _rotl(t, cell, nbits, mask)
        if t < best:
            best = t
            best_j = j
    shift_out[0] = best_j
    return best


cdef inline int64_t _bsearch(const uint64_t[::1] arr, uint64_t key) noexcept nogil:
    cdef int64_t lo = 0, hi = arr.shape[0] - 1, mid
    while lo <= hi:
        mid = (lo + hi) >> 1
        if arr[mid] < key:
            lo = mid + 1
        elif arr[mid] > key:
            hi = mid - 1
        else:
            return mid
    return -1


def orbit_representatives(int L, int cell):
    """Smallest member and period of every translation orbit, ascending."""
    cdef int nbits = L * cell
    cdef uint64_t mask = (<uint64_t>1 << nbits) - 1
    cdef uint64_t total = <uint64_t>1 << nbits
    cdef uint64_t s, t
    cdef int j, period
    cdef int64_t count = 0, pos = 0
    cdef bint is_rep

    with nogil:
        for s in range(total):
            t = s
            is_rep = True
            for j in range(1, L + 1):
                t = _rotl(t, cell, nbits, mask)
                if t < s:
                    is_rep = False
                    break
                if t == s:
                    break
            if is_rep:
                count += 1

    reps = np.empty(count, dtype=np.uint64)
    periods = np.empty(count, dtype=np.int32)
    cdef uint64_t[::1] rv = reps
    cdef int32_t[::1] pv = periods
    with nogil:
        for s in range(total):
            t = s
            is_rep = True
            period = L
            for j in range(1, L + 1):
                t = _rotl(t, cell, nbits, mask)
                if t < s:
                    is_rep = False
                    break
                if t == s:
                    period = j
                    break
            if is_rep:
                rv[pos] = s
                pv[pos] = period
                pos += 1
    return reps, periods


def canonicalize(const uint64_t[::1] states, int L, int cell):
    """Return (representative, shift) with T**shift state == representative."""
    cdef int nbits = L * cell
    cdef uint64_t mask = (<uint64_t>1 << nbits) - 1
    cdef Py_ssize_t n = states.shape[0], a
    cdef int sh
    reps = np.empty(n, dtype=np.uint64)
    shifts = np.empty(n, dtype=np.int32)
    cdef uint64_t[::1] rv = reps
    cdef int32_t[::1] sv = shifts
    with nogil:
        for a in range(n):
            rv[a] = _canonical(states[a], L, cell, nbits, mask, &sh)
            sv[a] = sh
    return reps, shifts


def flip_table(const uint64_t[::1] reps, int L, int cell):
    """cols[a, i] = index of the orbit reached by flipping bit i of reps[a], or -1."""
    cdef int nbits = L * cell
    cdef uint64_t mask = (<uint64_t>1 << nbits) - 1
    cdef Py_ssize_t dim = reps.shape[0], a
    cdef int i, sh
    cdef uint64_t r
    cols = np.empty((dim, nbits), dtype=np.int32)
    cdef int32_t[:, ::1] cv = cols
    with nogil:
        for a in range(dim):
            for i in range(nbits):
                r = _canonical(reps[a] ^ (<uint64_t>1 << i), L, cell, nbits, mask, &sh)
                cv[a, i] = <int32_t>_bsearch(reps, r)
    return cols


def table_apply(const int32_t[:, ::1] cols, const double[::1] z, double[::1] out):
    """out[a] = sum_i z[cols[a, i]] over valid entries."""
    cdef Py_ssize_t dim = cols.shape[0], a
    cdef int nz = cols.shape[1], i
    cdef int32_t c
    cdef double acc
    with nogil:
        for a in range(dim):
            acc = 0.0
            for i in range(nz):
                c = cols[a, i]
                if c >= 0:
                    acc = acc + z[c]
            out[a] = acc


def full_flip_apply(const double[::1] x, int nbits, double[::1] out):
    """out[s] = sum_i x[s ^ (1 << i)] on the full 2**nbits basis."""
    cdef Py_ssize_t total = x.shape[0], s
    cdef int i
    cdef double acc
    with nogil:
        for s in range(total):
            acc = 0.0
            for i in range(nbits):
                acc = acc + x[s ^ (<Py_ssize_t>1 << i)]
            out[s] = acc


cdef inline double _ladder_flip_cost(const int8_t[::1] sp, int L, int site,
                                     double K, double U) noexcept nogil:
    cdef int r = site >> 1
    cdef int rl = (r + L - 1) % L, rr = (r + 1) % L
    cdef double s = sp[site]
    if site & 1 == 0:
        # top: +K t t' (both neighbours), -K t u (rung), -K t (field)
        return -2.0 * s * (K * (sp[2 * rl] + sp[2 * rr]) - K * sp[2 * r + 1] - K)
    # bottom: -K u u' (both neighbours), -K t u (rung), +U/2 u (field)
    return -2.0 * s * (-K * (sp[2 * rl + 1] + sp[2 * rr + 1]) - K * sp[2 * r] + 0.5 * U)


def metropolis_sweeps(int8_t[::1] spins, int L, double K, double U,
                      const int64_t[::1] sites, const double[::1] uniforms,
                      const double[::1] betas, double energy,
                      double target, double tol, bint stop_at_target):
    """Run len(betas) sweeps of 2L single-spin Metropolis proposals in place.

    Returns (energy, first_hit, sweeps_done); first_hit is the 1-based sweep
    index within this block at which energy first reached target, or -1.
    """
    cdef Py_ssize_t n_sweeps = betas.shape[0], sw, p
    cdef int per = 2 * L, site
    cdef Py_ssize_t k = 0
    cdef double dE, beta
    cdef int64_t first_hit = -1
    cdef Py_ssize_t done = 0
    with nogil:
        for sw in range(n_sweeps):
            beta = betas[sw]
            for p in range(per):
                site = <int>sites[k]
                dE = _ladder_flip_cost(spins, L, site, K, U)
                if dE <= 0.0 or uniforms[k] < exp(-beta * dE):
                    spins[site] = -spins[site]
                    energy = energy + dE
                    if first_hit < 0 and energy <= target + tol:
                        first_hit = sw + 1
                k += 1
            done = sw + 1
            if stop_at_target and first_hit >= 0:
                break
    return energy, first_hit, done
