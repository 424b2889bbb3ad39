"""Numpy implementations of the compiled kernels (same signatures, same results)."""
import math

import numpy as np

_CHUNK = 1 << 20


def _rotl(s, shift, nbits, mask):
    if shift == 0:
        return s
    return ((s << np.uint64(shift)) | (s >> np.uint64(nbits - shift))) & mask


def _canonical_block(states, L, cell):
    nbits = L * cell
    mask = np.uint64((1 << nbits) - 1)
    best = states.copy()
    shift = np.zeros(states.shape, dtype=np.int32)
    t = states
    for j in range(1, L):
        t = _rotl(t, cell, nbits, mask)
        smaller = t < best
        best[smaller] = t[smaller]
        shift[smaller] = j
    return best, shift


def orbit_representatives(L, cell):
    nbits = L * cell
    mask = np.uint64((1 << nbits) - 1)
    reps, periods = [], []
    for start in range(0, 1 << nbits, _CHUNK):
        s = np.arange(start, min(start + _CHUNK, 1 << nbits), dtype=np.uint64)
        is_rep = np.ones(s.shape, dtype=bool)
        period = np.full(s.shape, L, dtype=np.int32)
        open_ = np.ones(s.shape, dtype=bool)
        t = s
        for j in range(1, L + 1):
            t = _rotl(t, cell, nbits, mask)
            is_rep &= ~(open_ & (t < s))
            back = open_ & (t == s)
            period[back] = j
            open_ &= ~back
        reps.append(s[is_rep])
        periods.append(period[is_rep])
    return np.concatenate(reps), np.concatenate(periods).astype(np.int32)


def canonicalize(states, L, cell):
    states = np.ascontiguousarray(states, dtype=np.uint64)
    reps = np.empty_like(states)
    shifts = np.empty(states.shape, dtype=np.int32)
    for start in range(0, states.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        reps[sl], shifts[sl] = _canonical_block(states[sl], L, cell)
    return reps, shifts


def flip_table(reps, L, cell):
    reps = np.ascontiguousarray(reps, dtype=np.uint64)
    nbits = L * cell
    cols = np.empty((reps.shape[0], nbits), dtype=np.int32)
    for i in range(nbits):
        r, _ = canonicalize(reps ^ np.uint64(1 << i), L, cell)
        pos = np.searchsorted(reps, r)
        pos_c = np.minimum(pos, reps.shape[0] - 1)
        cols[:, i] = np.where(reps[pos_c] == r, pos_c, -1)
    return cols


def table_apply(cols, z, out):
    z_ext = np.append(z, 0.0)  # index -1 picks the appended zero
    out[:] = z_ext[cols].sum(axis=1)


def full_flip_apply(x, nbits, out):
    out[:] = 0.0
    for i in range(nbits):
        out += x.reshape(-1, 2, 1 << i)[:, ::-1, :].reshape(-1)


def _ladder_flip_cost(sp, L, site, K, U):
    r = site >> 1
    rl, rr = (r - 1) % L, (r + 1) % L
    s = float(sp[site])
    if site & 1 == 0:
        return -2.0 * s * (K * (sp[2 * rl] + sp[2 * rr]) - K * sp[2 * r + 1] - K)
    return -2.0 * s * (-K * (sp[2 * rl + 1] + sp[2 * rr + 1]) - K * sp[2 * r] + 0.5 * U)


def metropolis_sweeps(spins, L, K, U, sites, uniforms, betas, energy, target, tol,
                      stop_at_target):
    per = 2 * L
    k = 0
    first_hit = -1
    done = 0
    sp = spins
    for sw in range(betas.shape[0]):
        beta = betas[sw]
        for _ in range(per):
            site = int(sites[k])
            dE = _ladder_flip_cost(sp, L, site, K, U)
            if dE <= 0.0 or uniforms[k] < math.exp(-beta * dE):
                sp[site] = -sp[site]
                energy += dE
                if first_hit < 0 and energy <= target + tol:
                    first_hit = sw + 1
            k += 1
        done = sw + 1
        if stop_at_target and first_hit >= 0:
            break
    return energy, first_hit, done
