"""Spin Hamiltonians of the staggered-field chain and the frustrated Ising ladder.

Every model here has the form ``H = diag(D) - gamma * A`` where ``A`` is a fixed,
parameter-free hopping operator (the sum of sigma^x, or of plaquette flips for
the dimer model) and ``D`` carries all classical energies.  Sweeping the
transverse field therefore only rescales one term and never rebuilds ``A``.

Ladder gauge (checked by the tests against the dimer-model signatures):

    H_I = +K sum_r t_r t_{r+1}        top-row bonds, antiferromagnetic
          -K sum_r t_r u_r            rungs, ferromagnetic
          -K sum_r u_r u_{r+1}        bottom-row bonds, ferromagnetic
          -K sum_r t_r                top field
          +(U/2) sum_r u_r            bottom field
          -gamma sum_all sigma^x

with t_r (u_r) the top (bottom) spin of rung r.  Every triangle formed by the
top field and a top bond, and every square of the ladder, is frustrated; the
unsatisfied K-terms of a classical ground state sit on the links of a dimer
covering of the dual ladder.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from . import CapacityError, _core
from .spin_basis import build_momentum_sector, canonical, cell_size, enumerate_basis, translate

DENSE_LIMIT = 4096
MAX_CHAIN_FULL_L = 24
MAX_LADDER_FULL_L = 12
MAX_LADDER_SECTOR_L = 13


@dataclass(frozen=True)
class ChainParams:
    L: int
    J: float = 1.0
    h: float = 0.0
    Gamma: float = 0.0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("chain needs L >= 2")
        if not np.all(np.isfinite([self.J, self.h, self.Gamma])):
            raise ValueError("chain parameters must be finite")
        if self.Gamma < 0:
            raise ValueError("Gamma must be non-negative")


@dataclass(frozen=True)
class LadderParams:
    L: int
    K: float
    U: float = 1.0
    Gamma: float = 0.0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("ladder needs L >= 2")
        if not (self.K > 0 and self.U > 0):
            raise ValueError("ladder needs K > 0 and U > 0")
        if self.Gamma < 0:
            raise ValueError("Gamma must be non-negative")


# -- hopping operators ------------------------------------------------------

class FullFlipHopping:
    """Sum of sigma^x over all sites in the full 2**nbits basis."""

    def __init__(self, nbits):
        self.nbits = nbits
        self.dimension = 1 << nbits
        self.dtype = np.float64

    def apply(self, x):
        out = np.empty(self.dimension)
        _core.kernels.full_flip_apply(np.ascontiguousarray(x, dtype=np.float64), self.nbits, out)
        return out

    def to_sparse(self):
        states = np.arange(self.dimension, dtype=np.int64)
        rows = np.concatenate([states ^ (1 << i) for i in range(self.nbits)])
        cols = np.tile(states, self.nbits)
        data = np.ones(rows.shape[0])
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.dimension,) * 2)


class TableHopping:
    """k=0 sector sum of sigma^x from a precomputed flip table.

    Entry <b|A|a> = sqrt(p_a / p_b) per flip taking orbit a into orbit b.
    """

    def __init__(self, cols, periods):
        self.cols = cols
        self.sqrt_p = np.sqrt(periods.astype(np.float64))
        self.dimension = cols.shape[0]
        self.dtype = np.float64

    def apply(self, x):
        z = np.ascontiguousarray(x, dtype=np.float64) / self.sqrt_p
        out = np.empty(self.dimension)
        _core.kernels.table_apply(self.cols, z, out)
        out *= self.sqrt_p
        return out

    def to_sparse(self):
        dim, nz = self.cols.shape
        rows = np.repeat(np.arange(dim), nz)
        cols = self.cols.reshape(-1)
        ok = cols >= 0
        data = (self.sqrt_p[rows] / self.sqrt_p[np.where(ok, cols, 0)])[ok]
        return sparse.csr_matrix((data, (rows[ok], cols[ok])), shape=(dim, dim))


class MatrixHopping:
    def __init__(self, matrix):
        self.matrix = sparse.csr_matrix(matrix)
        self.dimension = self.matrix.shape[0]
        self.dtype = self.matrix.dtype

    def apply(self, x):
        return self.matrix @ x

    def to_sparse(self):
        return self.matrix


class SparseHamiltonian:
    """Symmetric (Hermitian) operator ``diag(diagonal) - gamma * hopping``.

    ``apply`` is matrix-free; an explicit dense copy is only built on request
    and only up to DENSE_LIMIT states.
    """

    def __init__(self, diagonal, gamma, hopping, basis_tag="full", meta=None):
        self.diagonal = np.asarray(diagonal, dtype=np.float64)
        self.gamma = float(gamma)
        self.hopping = hopping
        self.basis_tag = basis_tag
        self.meta = dict(meta or {})
        if self.diagonal.shape != (hopping.dimension,):
            raise ValueError("diagonal does not match hopping dimension")

    @property
    def dimension(self):
        return self.hopping.dimension

    @property
    def shape(self):
        return (self.dimension, self.dimension)

    @property
    def dtype(self):
        return np.result_type(self.hopping.dtype, np.float64)

    @property
    def is_real(self):
        return not np.issubdtype(self.dtype, np.complexfloating)

    def apply(self, v):
        v = np.asarray(v)
        if v.ndim == 2:
            return np.column_stack([self.apply(v[:, j]) for j in range(v.shape[1])])
        if self.is_real and np.iscomplexobj(v):
            return self.apply(v.real) + 1j * self.apply(v.imag)
        out = self.diagonal * v
        if self.gamma != 0.0:
            out = out - self.gamma * self.hopping.apply(v)
        return out

    __matmul__ = apply

    def with_parameters(self, diagonal=None, gamma=None, meta=None):
        """Same hopping structure with a new diagonal and/or field strength."""
        return SparseHamiltonian(
            self.diagonal if diagonal is None else diagonal,
            self.gamma if gamma is None else gamma,
            self.hopping,
            self.basis_tag,
            {**self.meta, **(meta or {})},
        )

    def off_diagonal_count(self):
        if self.gamma == 0.0:
            return 0
        m = self.hopping.to_sparse()
        m = m - sparse.diags(m.diagonal())
        m.eliminate_zeros()
        return int(m.nnz)

    def to_sparse(self):
        return sparse.diags(self.diagonal) - self.gamma * self.hopping.to_sparse()

    def to_dense(self):
        if self.dimension > DENSE_LIMIT:
            raise CapacityError(
                f"dense storage of dimension {self.dimension} exceeds {DENSE_LIMIT}")
        return self.to_sparse().toarray()

    def norm_bound(self):
        """Cheap upper bound on the spectral norm (Gershgorin-style)."""
        n_flip = self.meta.get("n_flip", 0)
        return float(np.abs(self.diagonal).max() + abs(self.gamma) * n_flip)

    def __repr__(self):
        return f"SparseHamiltonian(dim={self.dimension}, basis={self.basis_tag}, gamma={self.gamma})"


# -- diagonal energies ------------------------------------------------------

def _bits(states, positions):
    return ((states[:, None] >> positions[None, :].astype(np.uint64)) & np.uint64(1)).astype(np.int8) * 2 - 1


def chain_diagonal(states, L, J, h):
    """J sum s_i s_{i+1} - sum_i (-1)**i h s_i for each configuration."""
    states = np.asarray(states, dtype=np.uint64)
    s = _bits(states, np.arange(L))
    zz = (s * np.roll(s, -1, axis=1)).sum(axis=1)
    stag = (s * ((-1) ** np.arange(L))[None, :]).sum(axis=1)
    return J * zz - h * stag


def ladder_diagonal(states, L, K, U):
    states = np.asarray(states, dtype=np.uint64)
    t = _bits(states, 2 * np.arange(L)).astype(np.int64)
    u = _bits(states, 2 * np.arange(L) + 1).astype(np.int64)
    top_bonds = (t * np.roll(t, -1, axis=1)).sum(axis=1)
    bot_bonds = (u * np.roll(u, -1, axis=1)).sum(axis=1)
    rungs = (t * u).sum(axis=1)
    return (K * top_bonds - K * rungs - K * bot_bonds - K * t.sum(axis=1)
            + 0.5 * U * u.sum(axis=1))


def ladder_energy(state, p):
    return float(ladder_diagonal(np.array([state], dtype=np.uint64), p.L, p.K, p.U)[0])


# -- sector hopping ---------------------------------------------------------

@lru_cache(maxsize=4)
def _k0_table(geometry, L):
    sector = build_momentum_sector(geometry, L, 0)
    cols = _core.kernels.flip_table(sector.representatives, L, cell_size(geometry))
    return sector, cols


def _general_sector_hopping(sector):
    """Bloch-basis matrix of sum sigma^x for arbitrary momentum."""
    reps = sector.representatives
    dim = sector.dimension
    k = sector.momentum
    rows, cols, vals = [], [], []
    a = np.arange(dim)
    for i in range(sector.n_sites):
        r, shift = canonical(reps ^ np.uint64(1 << i), sector.geometry, sector.L)
        b = sector.index_of(r)
        ok = b >= 0
        amp = np.sqrt(sector.periods[ok] / sector.periods[b[ok]])
        if 2 * sector.k_index == sector.L:
            phase = np.where(shift[ok] % 2 == 0, 1.0, -1.0)
        elif sector.k_index == 0:
            phase = np.ones(ok.sum())
        else:
            phase = np.exp(-1j * k * shift[ok])
        rows.append(b[ok])
        cols.append(a[ok])
        vals.append(amp * phase)
    data = np.concatenate(vals)
    dtype = np.float64 if sector.is_real else np.complex128
    m = sparse.csr_matrix((data.astype(dtype), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(dim, dim))
    return m


def sector_hopping(geometry, L, k_index):
    if k_index == 0:
        sector, cols = _k0_table(geometry, L)
        return sector, TableHopping(cols, sector.periods)
    sector = build_momentum_sector(geometry, L, k_index)
    return sector, MatrixHopping(_general_sector_hopping(sector))


# -- model builders ---------------------------------------------------------

def build_chain(p, k_index=None):
    """H = J sum s^z s^z - sum (-1)**i h s^z_i - Gamma sum s^x on the periodic chain.

    ``k_index=None`` selects the full basis; an integer selects that momentum
    sector, which is only a symmetry when h == 0.
    """
    if k_index is None:
        if p.L > MAX_CHAIN_FULL_L:
            raise CapacityError(f"full chain basis needs L <= {MAX_CHAIN_FULL_L}")
        states = enumerate_basis(p.L)
        diag = chain_diagonal(states, p.L, p.J, p.h)
        return SparseHamiltonian(diag, p.Gamma, FullFlipHopping(p.L), "full",
                                 {"model": "chain", "n_flip": p.L, "params": p})
    if p.h != 0.0:
        raise ValueError(
            "the staggered field breaks one-site translations; momentum sectors need h == 0")
    sector, hop = sector_hopping("chain", p.L, k_index)
    diag = chain_diagonal(sector.representatives, p.L, p.J, p.h)
    return SparseHamiltonian(diag, p.Gamma, hop, f"momentum({k_index})",
                             {"model": "chain", "n_flip": p.L, "params": p, "sector": sector})


def build_ladder(p, k_index=None):
    """Frustrated Ising ladder (see module docstring) in the full basis or a k sector."""
    if k_index is None:
        if p.L > MAX_LADDER_FULL_L:
            raise CapacityError(f"full ladder basis needs L <= {MAX_LADDER_FULL_L}")
        states = enumerate_basis(2 * p.L)
        diag = ladder_diagonal(states, p.L, p.K, p.U)
        return SparseHamiltonian(diag, p.Gamma, FullFlipHopping(2 * p.L), "full",
                                 {"model": "ladder", "n_flip": 2 * p.L, "params": p})
    if p.L > MAX_LADDER_SECTOR_L:
        raise CapacityError(f"ladder momentum sector needs L <= {MAX_LADDER_SECTOR_L}")
    sector, hop = sector_hopping("ladder", p.L, k_index)
    diag = ladder_diagonal(sector.representatives, p.L, p.K, p.U)
    return SparseHamiltonian(diag, p.Gamma, hop, f"momentum({k_index})",
                             {"model": "ladder", "n_flip": 2 * p.L, "params": p, "sector": sector})


def reparametrize_ladder(H, p):
    """Reuse the hopping structure of a ladder operator for new (K, U, Gamma)."""
    old = H.meta["params"]
    if old.L != p.L:
        raise ValueError("cannot change L when reparametrizing")
    if (old.K, old.U) == (p.K, p.U):
        diag = H.diagonal
    elif "sector" in H.meta:
        diag = ladder_diagonal(H.meta["sector"].representatives, p.L, p.K, p.U)
    else:
        diag = ladder_diagonal(enumerate_basis(2 * p.L), p.L, p.K, p.U)
    return H.with_parameters(diag, p.Gamma, {"params": p})


def translation_permutation(geometry, L):
    """perm with (T v)[perm[s]] = v[s] on the full basis."""
    states = enumerate_basis(L * cell_size(geometry))
    return translate(states, geometry, L, 1).astype(np.int64)


def translate_vector(v, geometry, L):
    out = np.empty_like(v)
    out[translation_permutation(geometry, L)] = v
    return out


# -- classical ladder -------------------------------------------------------

@dataclass(frozen=True)
class ClassicalGroundState:
    energy: float
    degeneracy: int
    cycles: tuple  # minimizing rung-state sequences (rung state = top_bit + 2*bottom_bit)
    transfer: np.ndarray  # single-step min-plus transfer matrix W[q, q']

    def states(self):
        """Bit-encoded configurations of the listed minimizing cycles."""
        out = []
        for cyc in self.cycles:
            s = 0
            for r, q in enumerate(cyc):
                s |= int(q) << (2 * r)
            out.append(s)
        return out


def rung_transfer_matrix(p):
    """W[q, q'] = energy of rung q plus its bond to the next rung q' (min-plus weights)."""
    W = np.empty((4, 4))
    for q in range(4):
        t, u = (1 if q & 1 else -1), (1 if q & 2 else -1)
        site = -p.K * t - p.K * t * u + 0.5 * p.U * u
        for q2 in range(4):
            t2, u2 = (1 if q2 & 1 else -1), (1 if q2 & 2 else -1)
            W[q, q2] = site + p.K * t * t2 - p.K * u * u2
    return W


def _minplus(A, NA, B, NB, tol):
    S = A[:, :, None] + B[None, :, :]
    C = S.min(axis=1)
    hit = S <= C[:, None, :] + tol
    N = (NA[:, :, None] * NB[None, :, :] * hit).sum(axis=1)
    return C, N


def classical_ground_energy(p, max_cycles=64):
    """Exact classical minimum of the ladder by a 4-state min-plus transfer matrix.

    Returns the minimum, the number of minimizing configurations, and up to
    ``max_cycles`` minimizing rung-state cycles.
    """
    if p.Gamma != 0.0:
        raise ValueError("classical ground energy requires Gamma == 0")
    W = rung_transfer_matrix(p)
    tol = 1e-9 * max(1.0, np.abs(W).max())
    one = np.ones((4, 4), dtype=object)
    # powers[m] = (cost, count) of m-step paths
    powers = [(W, one)]
    for _ in range(p.L - 1):
        C, N = _minplus(powers[-1][0], powers[-1][1], W, one, tol)
        powers.append((C, N))
    C, N = powers[-1]
    energy = float(np.diag(C).min())
    degeneracy = int(sum(N[q, q] for q in range(4) if C[q, q] <= energy + tol))

    cycles = []

    def extend(path, cost):
        if len(cycles) >= max_cycles:
            return
        steps_left = p.L - len(path)
        q = path[-1]
        if steps_left == 0:
            if abs(cost + W[q, path[0]] - energy) <= tol:
                cycles.append(tuple(path))
            return
        rest = powers[steps_left - 1][0]
        for q2 in range(4):
            if cost + W[q, q2] + rest[q2, path[0]] <= energy + tol:
                extend(path + [q2], cost + W[q, q2])

    for q0 in range(4):
        if C[q0, q0] <= energy + tol:
            extend([q0], 0.0)
    return ClassicalGroundState(energy, degeneracy, tuple(cycles), W)


def exhaustive_ground_energy(p):
    """Brute-force minimum and its degeneracy over all 2**(2L) configurations."""
    if 2 * p.L > 24:
        raise CapacityError("exhaustive scan limited to L <= 12")
    e = ladder_diagonal(enumerate_basis(2 * p.L), p.L, p.K, p.U)
    emin = e.min()
    tol = 1e-9 * max(1.0, abs(emin))
    return float(emin), int((e <= emin + tol).sum())


def unsatisfied_k_terms(states, L):
    """Number of unsatisfied terms of order K (bonds and top field) per configuration."""
    states = np.asarray(states, dtype=np.uint64)
    t = _bits(states, 2 * np.arange(L)).astype(np.int64)
    u = _bits(states, 2 * np.arange(L) + 1).astype(np.int64)
    bad = (t * np.roll(t, -1, axis=1) > 0).sum(axis=1)      # antiferro top bonds
    bad += (t * u < 0).sum(axis=1)                           # rungs
    bad += (u * np.roll(u, -1, axis=1) < 0).sum(axis=1)     # bottom bonds
    bad += (t < 0).sum(axis=1)                               # top field
    return bad


# -- observables ------------------------------------------------------------

def staggered_magnetization(state, L):
    """(1/L) sum_i (-1)**i <sigma^z_i> for a normalized full-basis chain state."""
    v = np.asarray(state)
    if v.shape != (1 << L,):
        raise ValueError(f"expected a full-basis vector of length {1 << L}")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"state is not normalized (norm={norm:.3g})")
    prob = np.abs(v) ** 2
    stag = chain_diagonal(enumerate_basis(L), L, 0.0, -1.0)  # = sum (-1)**i s_i
    return float(prob @ stag) / L
