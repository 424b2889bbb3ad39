"""Free-fermion solution of the periodic transverse-field Ising chain.

Convention (rotated basis):  H = -J sum sigma^x_i sigma^x_{i+1} - Gamma sum sigma^z_i,
so J > 0 is ferromagnetic.  Swapping sigma^x <-> sigma^z maps this onto the
chain of ``models.build_chain`` with coupling -J; spectra are identical.

Majoranas are ordered (g_1, g_1', g_2, g_2', ...) -> matrix indices
(0, 1, 2, 3, ...).  Within the parity sector P the Hamiltonian is
H_P = (i/4) g^T h g with

    h[g_j', g_{j+1}] = 2J,   h[g_L', g_1] = -2 J P,   h[g_j, g_j'] = 2 Gamma,

antisymmetrized.  The eigenvalues of i h are +/- 2 eps(k); the vacuum has
energy -sum_k eps(k) and parity sgn Pf(h).
"""
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import NumericalError


def dispersion(J, Gamma, k):
    """eps(k) = sqrt(J^2 + Gamma^2 - 2 J Gamma cos k) (positive-energy modes)."""
    k = np.asarray(k, dtype=np.float64)
    val = np.sqrt(np.maximum(J * J + Gamma * Gamma - 2.0 * J * Gamma * np.cos(k), 0.0))
    return float(val) if val.ndim == 0 else val


def dispersion_shifted(J, Gamma, q):
    """Same band written with momentum measured from pi: eps(q + pi)."""
    return dispersion(J, Gamma, np.asarray(q) + np.pi)


def sector_momenta(L, P):
    """P = -1: k = 2 pi n / L (periodic); P = +1: k = 2 pi (n + 1/2) / L."""
    if P not in (1, -1):
        raise ValueError("P must be +1 or -1")
    n = np.arange(L, dtype=np.float64)
    return 2.0 * np.pi * (n + (0.5 if P == 1 else 0.0)) / L


@dataclass(frozen=True)
class QuadraticMajoranaForm:
    h_matrix: np.ndarray
    sector: int
    ordering: str = "g1,g1',g2,g2',..."

    @classmethod
    def chain(cls, J, Gamma, L, P):
        if P not in (1, -1):
            raise ValueError("P must be +1 or -1")
        if L < 2:
            raise ValueError("L must be at least 2")
        n = 2 * L
        h = np.zeros((n, n))
        for j in range(L):
            h[2 * j, 2 * j + 1] = 2.0 * Gamma
        for j in range(L - 1):
            h[2 * j + 1, 2 * j + 2] = 2.0 * J
        h[2 * L - 1, 0] += -2.0 * J * P
        h = h - h.T
        return cls(h, P)

    def single_particle_energies(self):
        """Non-negative eigenvalues of i h, ascending (each equals 2 eps)."""
        w = np.linalg.eigvalsh(1j * self.h_matrix)
        return np.sort(w[w.shape[0] // 2:])

    def pfaffian(self):
        return pfaffian(self.h_matrix)


def _reflector(x):
    """Unit v and alpha with (I - 2 v v^T) x = alpha e_0; v is None when x is already e_0-aligned."""
    sigma = float(x[1:] @ x[1:])
    if sigma == 0.0:
        return None, float(x[0])
    norm = math.sqrt(x[0] * x[0] + sigma)
    v = x.copy()
    alpha = norm if x[0] <= 0 else -norm
    v[0] -= alpha
    return v / np.linalg.norm(v), alpha


def pfaffian(A):
    """Pfaffian of a real antisymmetric matrix via Householder tridiagonalization.

    Column i is reduced to a single entry alpha_i just below the diagonal by a
    reflection acting on rows/columns i+1..n-1.  Each reflection has determinant
    -1, and Pf(T) = T[0,1] T[2,3] ... for the resulting tridiagonal T.
    """
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("square matrix required")
    if not np.allclose(A, -A.T, atol=1e-13 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix is not antisymmetric")
    if n % 2:
        return 0.0
    pf = 1.0
    for i in range(n - 2):
        v, alpha = _reflector(A[i + 1:, i])
        A[i + 1, i], A[i, i + 1] = alpha, -alpha
        A[i + 2:, i] = 0.0
        A[i, i + 2:] = 0.0
        if v is not None:
            w = 2.0 * (A[i + 1:, i + 1:] @ v)
            A[i + 1:, i + 1:] += np.outer(v, w) - np.outer(w, v)
            pf = -pf
        if i % 2 == 0:
            pf *= -alpha
    return float(pf * A[n - 2, n - 1])


def pfaffian_bruteforce(A):
    """Pfaffian by expansion along the first row (tests only; n <= 12)."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0
    if n > 12:
        raise ValueError("brute-force Pfaffian limited to n <= 12")
    total = 0.0
    rest = list(range(1, n))
    for pos, j in enumerate(rest):
        if A[0, j] == 0.0:
            continue
        keep = [r for r in rest if r != j]
        total += (-1) ** pos * A[0, j] * pfaffian_bruteforce(A[np.ix_(keep, keep)])
    return total


def vacuum_parity(J, Gamma, L, P, rel_tol=1e-12):
    """sgn Pf(h) of the sector-P quadratic form; raises NumericalError at a gapless point."""
    form = QuadraticMajoranaForm.chain(J, Gamma, L, P)
    pf = form.pfaffian()
    scale = max(np.abs(form.h_matrix).max(), 1e-300) ** L
    if abs(pf) <= rel_tol * scale:
        raise NumericalError(
            f"vacuum parity ambiguous: |Pf(h)|={abs(pf):.3g} (J={J}, Gamma={Gamma}, L={L}, P={P})")
    return 1 if pf > 0 else -1


def analytic_vacuum_parity(J, Gamma, L, P):
    """Parity at the solvable points J = 0 or Gamma = 0 (sign continued adiabatically)."""
    if J == 0:
        return 1
    if Gamma == 0:
        return P * (1 if J > 0 else (-1) ** L)
    raise ValueError("analytic parity only at J = 0 or Gamma = 0")


@dataclass(frozen=True)
class FermionSolution:
    sector: int
    momenta: np.ndarray
    mode_energies: np.ndarray
    vacuum_energy: float
    vacuum_parity: int
    sector_ground_energy: float


def solve_sector(J, Gamma, L, P):
    k = sector_momenta(L, P)
    eps = dispersion(J, Gamma, k)
    e0 = -float(np.sum(eps))
    par = vacuum_parity(J, Gamma, L, P)
    ground = e0 if par == P else e0 + 2.0 * float(eps.min())
    return FermionSolution(P, k, eps, e0, par, ground)


def _sector_levels(sol, count=2):
    """Lowest `count` many-body levels in a sector: (energy, label) pairs."""
    eps = sol.mode_energies
    order = np.argsort(eps, kind="stable")
    P = sol.sector
    out = []
    if sol.vacuum_parity == P:
        out.append((sol.vacuum_energy, f"P={P:+d} vacuum"))
        for a, b in itertools.combinations(order[: count + 2], 2):
            out.append((sol.vacuum_energy + 2.0 * (eps[a] + eps[b]),
                        f"P={P:+d} 2p(k={sol.momenta[a]:.4f},{sol.momenta[b]:.4f})"))
    else:
        for a in order[: count + 2]:
            out.append((sol.vacuum_energy + 2.0 * eps[a], f"P={P:+d} 1p(k={sol.momenta[a]:.4f})"))
    out.sort(key=lambda t: t[0])
    return out[:count]


@dataclass(frozen=True)
class ManyBodyGap:
    E_ground: float
    E_first_excited: float
    gap: float
    labels: tuple


def many_body_spectrum(J, Gamma, L):
    """Two lowest many-body energies of the periodic chain from both parity sectors."""
    levels = []
    for P in (1, -1):
        levels.extend(_sector_levels(solve_sector(J, Gamma, L, P)))
    levels.sort(key=lambda t: t[0])
    (e0, l0), (e1, l1) = levels[:2]
    return ManyBodyGap(e0, e1, e1 - e0, (l0, l1))


def odd_afm_gap_estimate(Gamma, L):
    """Small-q expansion 2[eps(pi + pi/L) - eps(pi)] for |J| = 1, Gamma < 1."""
    return Gamma * math.pi ** 2 / ((1.0 - Gamma) * L ** 2)
