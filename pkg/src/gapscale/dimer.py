"""Hardcore dimer model on the periodic two-leg ladder.

Links are indexed by column: ``top`` and ``bottom`` bit c is the horizontal
link joining columns c and c+1 (mod L) on that leg, ``rung`` bit c the vertical
link of column c.  Plaquette c is bounded by rungs c, c+1 and horizontal links c.

Winding number: w = (-1)**c (top_c - bottom_c) on any cut c.  Staggered
coverings have w = +/-1 (one covering each, even L only); every other covering
has top_c == bottom_c on every cut and w = 0.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize, sparse

from . import NumericalError
from .models import MatrixHopping, SparseHamiltonian

MAX_DIMER_L = 24


@dataclass(frozen=True, order=True)
class DimerCovering:
    L: int
    top: int
    bottom: int
    rung: int
    winding: int = field(default=0, compare=False)

    def links(self):
        """Set of occupied links as (kind, column) pairs."""
        out = []
        for c in range(self.L):
            for kind, mask in (("top", self.top), ("bottom", self.bottom), ("rung", self.rung)):
                if (mask >> c) & 1:
                    out.append((kind, c))
        return out

    def is_hardcore(self):
        L = self.L
        for c in range(L):
            left = (c - 1) % L
            top_deg = ((self.top >> c) & 1) + ((self.top >> left) & 1) + ((self.rung >> c) & 1)
            bot_deg = ((self.bottom >> c) & 1) + ((self.bottom >> left) & 1) + ((self.rung >> c) & 1)
            if top_deg != 1 or bot_deg != 1:
                return False
        return True

    def cut_windings(self):
        return [(-1) ** c * (((self.top >> c) & 1) - ((self.bottom >> c) & 1))
                for c in range(self.L)]

    def n_vertical(self):
        return bin(self.rung).count("1")

    def n_doubled(self):
        """Plaquettes holding two parallel horizontal dimers."""
        return bin(self.top & self.bottom).count("1")


def _winding(L, top, bottom):
    w = (top & 1) - (bottom & 1)
    return w if L % 2 == 0 else 0


def enumerate_coverings(L):
    """All dimer coverings of the periodic ladder, grouped by winding number.

    Column transfer: the state carried across cut c is which of (top, bottom)
    vertices of column c+1 are already covered from the left.  The state across
    the closing cut (L-1 -> 0) is fixed first and checked at the end.
    """
    if not 2 <= L <= MAX_DIMER_L:
        raise ValueError(f"dimer ladder needs 2 <= L <= {MAX_DIMER_L}")
    found = []

    def column(c, in_top, in_bot, top, bottom, rung, close_top, close_bot):
        if c == L:
            if (in_top, in_bot) == (close_top, close_bot):
                found.append((top, bottom, rung))
            return
        last = c == L - 1
        # vertices of column c: covered from the left by (in_top, in_bot)
        for t_out in (0, 1):
            for b_out in (0, 1):
                if last and (t_out, b_out) != (close_top, close_bot):
                    continue
                for r in (0, 1):
                    if in_top + t_out + r != 1 or in_bot + b_out + r != 1:
                        continue
                    column(c + 1, t_out, b_out,
                           top | (t_out << c), bottom | (b_out << c), rung | (r << c),
                           close_top, close_bot)

    for close_top in (0, 1):
        for close_bot in (0, 1):
            column(0, close_top, close_bot, 0, 0, 0, close_top, close_bot)

    groups = {}
    for top, bottom, rung in sorted(set(found)):
        cov = DimerCovering(L, top, bottom, rung, _winding(L, top, bottom))
        groups.setdefault(cov.winding, []).append(cov)
    return groups


def ladder_graph_edges(L):
    """Edge list of the periodic ladder graph; vertex 2c is top, 2c+1 bottom of column c."""
    edges = []
    for c in range(L):
        nxt = (c + 1) % L
        edges.append((("top", c), 2 * c, 2 * nxt))
        edges.append((("bottom", c), 2 * c + 1, 2 * nxt + 1))
        edges.append((("rung", c), 2 * c, 2 * c + 1))
    return edges


def perfect_matchings(n_vertices, edges):
    """All perfect matchings of a multigraph given as (label, u, v) triples."""
    incident = {v: [] for v in range(n_vertices)}
    for e in edges:
        _, u, v = e
        if u == v:
            continue
        incident[u].append(e)
        incident[v].append(e)
    out = []

    def grow(covered, chosen):
        free = next((v for v in range(n_vertices) if not covered[v]), None)
        if free is None:
            out.append(frozenset(label for label, _, _ in chosen))
            return
        for e in incident[free]:
            _, u, v = e
            other = v if u == free else u
            if not covered[other]:
                covered[free] = covered[other] = True
                grow(covered, chosen + [e])
                covered[free] = covered[other] = False

    grow([False] * n_vertices, [])
    return out


def fibonacci(n):
    """F_1 = F_2 = 1."""
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def columnar_count(L):
    """Closed form for the w=0 count: 2 F_{L-1} + F_L (the Lucas number L_L)."""
    return 2 * fibonacci(L - 1) + fibonacci(L)


def _covering_index(coverings):
    return {(c.top, c.bottom, c.rung): i for i, c in enumerate(coverings)}


def plaquette_flip(cov, c):
    """Flip plaquette c (two rungs <-> two parallel horizontals), or None if not flippable."""
    L = cov.L
    c2 = (c + 1) % L
    rung_pair = (1 << c) | (1 << c2)
    h = 1 << c
    if (cov.rung & rung_pair) == rung_pair and not (cov.top & h) and not (cov.bottom & h):
        return DimerCovering(L, cov.top | h, cov.bottom | h, cov.rung & ~rung_pair, cov.winding)
    if (cov.top & h) and (cov.bottom & h):
        return DimerCovering(L, cov.top & ~h, cov.bottom & ~h, cov.rung | rung_pair, cov.winding)
    return None


def classical_energy(cov, U):
    """U per vertical dimer plus 2U per doubled plaquette."""
    return U * cov.n_vertical() + 2.0 * U * cov.n_doubled()


def build_dimer_hamiltonian(L, U, Gamma, sector=0):
    """H_cl - Gamma * (plaquette resonance) restricted to one winding sector."""
    groups = enumerate_coverings(L)
    if sector not in groups:
        raise ValueError(f"winding sector w={sector} is empty for L={L}")
    coverings = groups[sector]
    index = _covering_index(coverings)
    diag = np.array([classical_energy(c, U) for c in coverings])
    rows, cols = [], []
    for a, cov in enumerate(coverings):
        for c in range(L):
            new = plaquette_flip(cov, c)
            if new is None:
                continue
            b = index[(new.top, new.bottom, new.rung)]
            rows.append(b)
            cols.append(a)
    n = len(coverings)
    A = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return SparseHamiltonian(diag, Gamma, MatrixHopping(A), f"winding({sector})",
                             {"model": "dimer", "n_flip": L, "coverings": coverings,
                              "L": L, "U": U})


@dataclass(frozen=True)
class DimerSectorSpectrum:
    L: int
    U: float
    Gamma: float
    sector: int
    energies: np.ndarray
    b_L: float = float("nan")


def sector_spectrum(L, U, Gamma, sector=0):
    H = build_dimer_hamiltonian(L, U, Gamma, sector)
    e = np.linalg.eigvalsh(H.to_dense())
    b = (U * L - e[0]) / (Gamma * L) if (sector == 0 and Gamma > 0) else float("nan")
    return DimerSectorSpectrum(L, U, Gamma, sector, e, b)


def w0_ground_energy(L, U, Gamma):
    H = build_dimer_hamiltonian(L, U, Gamma, 0)
    return float(np.linalg.eigvalsh(H.to_dense())[0])


def compute_b(L, Gamma=1.0, U=1.0):
    """Resonance energy density b_L = (U L - E_0(w=0)) / (Gamma L)."""
    if L % 2:
        raise ValueError("b_L is defined on even-length ladders")
    if Gamma <= 0:
        raise ValueError("Gamma must be positive")
    return (U * L - w0_ground_energy(L, U, Gamma)) / (Gamma * L)


@dataclass(frozen=True)
class LevelCrossing:
    L: int
    U: float
    gamma_c: float
    b_L: float
    slope_below: float
    slope_above: float
    bracket: tuple


def locate_level_crossing(L, U=1.0, bracket=(1e-3, 10.0), xtol=1e-14):
    """Gamma at which the w=0 ground level crosses the staggered E=0 states.

    Brent root of E_0(w=0; Gamma) = 0.  The slopes are one-sided derivatives of
    the ground-state energy density min(0, E_0(w=0))/L.
    """
    if L % 2:
        raise ValueError("the staggered sectors only exist for even L")
    H = build_dimer_hamiltonian(L, U, 1.0, 0)
    dense_A = (np.diag(H.diagonal) - H.to_dense())  # hopping matrix (gamma = 1)

    def e0(g):
        return float(linalg.eigvalsh(np.diag(H.diagonal) - g * dense_A, subset_by_index=[0, 0])[0])

    lo, hi = bracket
    f_lo, f_hi = e0(lo), e0(hi)
    if not (f_lo > 0 > f_hi):
        raise NumericalError(
            f"no level crossing in bracket {bracket}: E0(w=0)={f_lo:.6g}, {f_hi:.6g}")
    gc = optimize.brentq(e0, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    b = compute_b(L, 1.0, U)
    d = 1e-4 * gc

    def eps0(g):
        return min(0.0, e0(g)) / L

    slope_below = (eps0(gc - d) - eps0(gc - 2 * d)) / d
    slope_above = (eps0(gc + 2 * d) - eps0(gc + d)) / d
    return LevelCrossing(L, U, gc, b, slope_below, slope_above, bracket)
