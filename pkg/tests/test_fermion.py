import math

import numpy as np
import pytest

from gapscale import NumericalError
from gapscale.analysis import fit_gap_scaling
from gapscale.fermion import (QuadraticMajoranaForm, analytic_vacuum_parity, dispersion,
                              dispersion_shifted, many_body_spectrum, odd_afm_gap_estimate,
                              pfaffian, pfaffian_bruteforce, sector_momenta, solve_sector,
                              vacuum_parity)
from gapscale.models import ChainParams, build_chain


def chain_ed(J, Gamma, L, m=2):
    """Lowest levels of the spin chain; fermion J > 0 is the ferromagnet, i.e. coupling -J."""
    H = build_chain(ChainParams(L, -J, 0.0, Gamma))
    return np.linalg.eigvalsh(H.to_dense())[:m]


# -- dispersion and momenta ---------------------------------------------------------

def test_dispersion_examples():
    assert dispersion(1, 1, 0) == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(dispersion(1, 0, np.linspace(0, 6, 7)), 1.0)
    assert dispersion(1, 0.5, math.pi) == pytest.approx(1.5)


def test_dispersion_shifted_is_main_text_form():
    q = np.linspace(0, 2 * np.pi, 9)
    J, G = 0.7, 0.4
    assert np.allclose(dispersion_shifted(J, G, q) ** 2, J * J + G * G + 2 * J * G * np.cos(q))


def test_sector_momenta():
    assert np.allclose(sector_momenta(2, 1), [np.pi / 2, 3 * np.pi / 2])
    assert np.allclose(sector_momenta(2, -1), [0, np.pi])
    for L in range(1, 13):
        a, b = sector_momenta(L, 1), sector_momenta(L, -1)
        assert a.size == b.size == L
        assert np.min(np.abs(a[:, None] - b[None, :])) > 1e-9


@pytest.mark.parametrize("L", [3, 4, 7])
@pytest.mark.parametrize("P", [1, -1])
def test_form_spectrum_matches_dispersion(L, P):
    """Eigenvalues of i h are +/- 2 eps(k) on the sector grid."""
    J, G = 0.8, 0.45
    form = QuadraticMajoranaForm.chain(J, G, L, P)
    h = form.h_matrix
    assert np.array_equal(h, -h.T)
    ev = np.sort(np.linalg.eigvalsh(1j * h))
    eps = np.sort(dispersion(J, G, sector_momenta(L, P)))
    assert np.allclose(ev[L:], 2 * eps, atol=1e-12)
    assert np.allclose(form.single_particle_energies(), 2 * eps, atol=1e-12)


# -- Pfaffian ---------------------------------------------------------------------

def test_pfaffian_vs_bruteforce(rng):
    for n in (2, 4, 6, 8, 10, 12):
        for _ in range(5):
            A = rng.standard_normal((n, n))
            A = A - A.T
            assert pfaffian(A) == pytest.approx(pfaffian_bruteforce(A), rel=1e-10)


def test_pfaffian_squared_is_determinant(rng):
    for L in (2, 3, 5, 8):
        for P in (1, -1):
            h = QuadraticMajoranaForm.chain(0.9, 0.6, L, P).h_matrix
            assert pfaffian(h) ** 2 == pytest.approx(np.linalg.det(h), rel=1e-8)
    A = rng.standard_normal((14, 14))
    A = A - A.T
    assert pfaffian(A) ** 2 == pytest.approx(np.linalg.det(A), rel=1e-8)


def test_pfaffian_odd_dimension_is_zero():
    assert pfaffian(np.zeros((3, 3))) == 0.0


def test_pfaffian_canonical_block():
    A = np.zeros((4, 4))
    A[0, 1], A[2, 3] = 2.0, 3.0
    A = A - A.T
    assert pfaffian(A) == pytest.approx(6.0)


# -- vacuum parity ----------------------------------------------------------------

@pytest.mark.parametrize("L", range(2, 15))
@pytest.mark.parametrize("P", [1, -1])
def test_parity_matches_analytic_limits(L, P):
    assert vacuum_parity(0.0, 1.0, L, P) == analytic_vacuum_parity(0.0, 1.0, L, P) == 1
    for J in (1.0, -1.0):
        assert vacuum_parity(J, 0.0, L, P) == analytic_vacuum_parity(J, 0.0, L, P)


def test_parity_examples():
    for L in (3, 5, 9):
        assert vacuum_parity(-1.0, 0.3, L, 1) == -1
        assert vacuum_parity(-1.0, 0.3, L, -1) == 1
    assert vacuum_parity(1.0, 0.0, 6, -1) == -1
    assert vacuum_parity(1.0, 0.2, 6, -1) == -1


def test_parity_ambiguous_at_criticality():
    with pytest.raises(NumericalError, match="ambiguous"):
        vacuum_parity(1.0, 1.0, 6, -1)
    with pytest.raises(NumericalError):
        many_body_spectrum(1.0, 1.0, 6)


def test_analytic_parity_domain():
    with pytest.raises(ValueError):
        analytic_vacuum_parity(1.0, 0.5, 4, 1)


# -- sector solutions -------------------------------------------------------------

def test_solution_invariants():
    for J in (1.0, -1.0):
        for L in (4, 5):
            for P in (1, -1):
                s = solve_sector(J, 0.4, L, P)
                assert np.all(s.mode_energies >= 0)
                assert s.momenta.size == L
                assert s.sector_ground_energy >= s.vacuum_energy


@pytest.mark.parametrize("P", [1, -1])
def test_vacuum_energy_concave_in_gamma(P):
    g = np.linspace(0.03, 2.0, 41)     # avoids the critical point Gamma = J
    e = np.array([solve_sector(1.0, x, 8, P).vacuum_energy for x in g])
    assert np.all(np.diff(e, 2) <= 1e-12)


# -- many-body spectrum vs ED -------------------------------------------------------

@pytest.mark.parametrize("L", range(2, 11))
@pytest.mark.parametrize("J", [1.0, -1.0])
@pytest.mark.parametrize("G", [0.2, 0.5, 0.9])
def test_many_body_matches_ed(L, J, G):
    mb = many_body_spectrum(J, G, L)
    ed = chain_ed(J, G, L)
    assert mb.E_ground == pytest.approx(ed[0], abs=1e-9)
    assert mb.E_first_excited == pytest.approx(ed[1], abs=1e-9)


def test_fm_L8_example():
    mb = many_body_spectrum(1.0, 0.5, 8)
    ed = chain_ed(1.0, 0.5, 8)
    assert mb.gap == pytest.approx(ed[1] - ed[0], abs=1e-10)
    # the splitting at L=8 is 1.456e-3, not below 1e-6; its decay is exponential in L
    assert mb.gap == pytest.approx(1.4560e-3, rel=1e-3)
    Ls = np.array([8, 10, 12, 14, 16])
    gaps = np.array([many_body_spectrum(1.0, 0.5, int(L)).gap for L in Ls])
    # local power-law exponent log(D_L / D_L+2) / log((L+2)/L) grows without bound
    p_local = np.log(gaps[:-1] / gaps[1:]) / np.log(Ls[1:] / Ls[:-1])
    assert np.all(np.diff(p_local) > 1.0)


def test_afm_odd_L5_example():
    mb = many_body_spectrum(-1.0, 0.1, 5)
    ed = chain_ed(-1.0, 0.1, 5)
    assert mb.gap == pytest.approx(ed[1] - ed[0], abs=1e-10)


def test_afm_odd_power_law():
    Ls = np.arange(9, 26, 2)
    gaps = [many_body_spectrum(-1.0, 0.3, int(L)).gap for L in Ls]
    fit = fit_gap_scaling(Ls, "power", gaps)
    assert fit.exponent == pytest.approx(-2.0, abs=0.05)
    # prefactor: Gamma pi^2 / (1 - Gamma) asymptotically, not 2 Gamma pi^2
    big = many_body_spectrum(-1.0, 0.3, 401).gap
    assert big == pytest.approx(odd_afm_gap_estimate(0.3, 401), rel=1e-2)


def test_odd_afm_labels():
    mb = many_body_spectrum(-1.0, 0.3, 7)
    assert all("1p" in lab for lab in mb.labels)
