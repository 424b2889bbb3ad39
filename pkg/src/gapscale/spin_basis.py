"""Bit-encoded spin product states, lattice translations and momentum sectors.

Site-to-bit map:

* chain of L sites: site i <-> bit i;
* two-leg ladder of L rungs: top spin of rung r <-> bit 2r, bottom <-> bit 2r+1.

A set bit is spin up (sigma^z = +1), a clear bit spin down (-1).  One lattice
translation moves rung r to rung r+1, i.e. a left rotation by one unit cell
(1 bit on the chain, 2 bits on the ladder).
"""
from dataclasses import dataclass, field

import numpy as np

from . import CapacityError, _core

MAX_FULL_SITES = 28
GEOMETRIES = {"chain": 1, "ladder": 2}


def cell_size(geometry):
    try:
        return GEOMETRIES[geometry]
    except KeyError:
        raise ValueError(f"unknown geometry {geometry!r}; expected 'chain' or 'ladder'") from None


@dataclass(frozen=True)
class SpinConfiguration:
    bits: int
    n_sites: int

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        if not 0 <= self.bits < (1 << self.n_sites):
            raise ValueError(f"bits={self.bits} out of range for {self.n_sites} sites")

    @classmethod
    def encode(cls, spins):
        """Build from a sequence of +1/-1 values indexed by site."""
        bits = 0
        for i, s in enumerate(spins):
            if s not in (1, -1):
                raise ValueError(f"spin values must be +1 or -1, got {s!r}")
            if s == 1:
                bits |= 1 << i
        return cls(bits, len(spins))

    def decode(self):
        return tuple(1 if (self.bits >> i) & 1 else -1 for i in range(self.n_sites))

    def spin(self, i):
        return 1 if (self.bits >> i) & 1 else -1


def enumerate_basis(n_sites):
    """All 2**n_sites configurations in ascending order, as a uint64 array."""
    if n_sites < 1:
        raise ValueError("n_sites must be positive")
    if n_sites > MAX_FULL_SITES:
        raise CapacityError(
            f"full basis of {n_sites} sites exceeds the {MAX_FULL_SITES}-site guard")
    return np.arange(1 << n_sites, dtype=np.uint64)


def translate(s, geometry, L, steps=1):
    """Cyclically shift a configuration (int or uint64 array) by `steps` unit cells."""
    cell = cell_size(geometry)
    nbits = L * cell
    shift = (steps % L) * cell
    if shift == 0:
        return s
    mask = (1 << nbits) - 1
    if isinstance(s, np.ndarray):
        s = s.astype(np.uint64, copy=False)
        return ((s << np.uint64(shift)) | (s >> np.uint64(nbits - shift))) & np.uint64(mask)
    s = int(s)
    return ((s << shift) | (s >> (nbits - shift))) & mask


def canonical(s, geometry, L):
    """Smallest configuration in the translation orbit of s, and the shift reaching it."""
    arr = np.atleast_1d(np.asarray(s, dtype=np.uint64))
    reps, shifts = _core.kernels.canonicalize(np.ascontiguousarray(arr), L, cell_size(geometry))
    if np.ndim(s) == 0:
        return int(reps[0]), int(shifts[0])
    return reps, shifts


def orbit_period(s, geometry, L):
    t = translate(s, geometry, L)
    p = 1
    while t != s:
        t = translate(t, geometry, L)
        p += 1
    return p


def apply_parity(s, n_sites):
    """Global spin flip (bitwise complement on n_sites bits)."""
    mask = (1 << n_sites) - 1
    if isinstance(s, np.ndarray):
        return s ^ np.uint64(mask)
    return int(s) ^ mask


def parity_sign(s):
    """Diagonal sign (-1)**popcount(s) of a configuration."""
    if isinstance(s, np.ndarray):
        return 1 - 2 * (popcount(s) & 1)
    return -1 if bin(int(s)).count("1") & 1 else 1


def popcount(a):
    a = np.asarray(a, dtype=np.uint64)
    return np.bitwise_count(a).astype(np.int64)


@dataclass(frozen=True)
class MomentumSector:
    """Translation-invariant block of momentum k = 2*pi*k_index/L.

    Basis state a is the Bloch sum
    ``|a> = p_a**-0.5 * sum_{l<p_a} exp(-i k l) T**l |representatives[a]>``
    where p_a = periods[a] is the orbit size; ``norms`` holds p_a**-0.5.
    """

    geometry: str
    L: int
    k_index: int
    representatives: np.ndarray = field(repr=False)
    periods: np.ndarray = field(repr=False)

    @property
    def norms(self):
        return 1.0 / np.sqrt(self.periods)

    @property
    def dimension(self):
        return int(self.representatives.shape[0])

    @property
    def n_sites(self):
        return self.L * cell_size(self.geometry)

    @property
    def momentum(self):
        return 2.0 * np.pi * self.k_index / self.L

    @property
    def is_real(self):
        return self.k_index == 0 or 2 * self.k_index == self.L

    def index_of(self, reps):
        """Positions of canonical representatives in this sector (-1 where absent)."""
        reps = np.asarray(reps, dtype=np.uint64)
        pos = np.searchsorted(self.representatives, reps)
        pos_c = np.minimum(pos, max(self.dimension - 1, 0))
        found = self.representatives[pos_c] == reps
        return np.where(found, pos_c, -1)


_ORBIT_CACHE = {}


def _orbits(geometry, L):
    key = (geometry, L)
    if key not in _ORBIT_CACHE:
        if L * cell_size(geometry) > MAX_FULL_SITES:
            raise CapacityError(f"{geometry} with L={L} exceeds the {MAX_FULL_SITES}-site guard")
        _ORBIT_CACHE[key] = _core.kernels.orbit_representatives(L, cell_size(geometry))
    return _ORBIT_CACHE[key]


def build_momentum_sector(geometry, L, k_index):
    if not 0 <= k_index < L:
        raise ValueError(f"k_index must lie in [0, {L}), got {k_index}")
    reps, periods = _orbits(geometry, L)
    keep = (k_index * periods) % L == 0
    return MomentumSector(geometry, L, k_index, reps[keep].copy(), periods[keep].copy())


def clear_cache():
    _ORBIT_CACHE.clear()
