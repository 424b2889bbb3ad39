import numpy as np
import pytest

from gapscale import NumericalError
from gapscale.dimer import (build_dimer_hamiltonian, columnar_count, compute_b, enumerate_coverings,
                            fibonacci, ladder_graph_edges, locate_level_crossing, perfect_matchings,
                            plaquette_flip, sector_spectrum, w0_ground_energy)


def matching_oracle(L):
    """Perfect matchings of the periodic ladder graph via networkx-free brute force on edge subsets."""
    edges = ladder_graph_edges(L)
    n = 2 * L
    count = 0
    # choose exactly L edges out of 3L covering every vertex once (bitmask over edges)
    m = len(edges)
    for mask in range(1 << m):
        if bin(mask).count("1") != L:
            continue
        deg = [0] * n
        ok = True
        for i in range(m):
            if (mask >> i) & 1:
                _, u, v = edges[i]
                deg[u] += 1
                deg[v] += 1
                if deg[u] > 1 or deg[v] > 1:
                    ok = False
                    break
        if ok:
            count += 1
    return count


# -- enumeration --------------------------------------------------------------

@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_counts_match_subset_oracle(L):
    groups = enumerate_coverings(L)
    assert sum(len(g) for g in groups.values()) == matching_oracle(L)


@pytest.mark.parametrize("L", range(2, 15))
def test_counts_match_matching_enumerator(L):
    groups = enumerate_coverings(L)
    total = sum(len(g) for g in groups.values())
    assert total == len(perfect_matchings(2 * L, ladder_graph_edges(L)))


@pytest.mark.parametrize("L", range(2, 25))
def test_sector_structure(L):
    groups = enumerate_coverings(L)
    if L % 2 == 0:
        assert sorted(groups) == [-1, 0, 1]
        assert len(groups[1]) == len(groups[-1]) == 1
    else:
        assert list(groups) == [0]
    assert len(groups[0]) == columnar_count(L)


def test_w0_count_L4_pins_fibonacci_convention():
    # 7 = L_4 (Lucas) = 2 F_3 + F_4 with F_1 = F_2 = 1
    assert len(enumerate_coverings(4)[0]) == 7
    assert columnar_count(4) == 2 * fibonacci(3) + fibonacci(4) == 7


def test_fibonacci_recurrence():
    c = {L: len(enumerate_coverings(L)[0]) for L in range(4, 15)}
    for L in range(6, 15):
        assert c[L] == c[L - 1] + c[L - 2]


@pytest.mark.parametrize("L", range(2, 13))
def test_coverings_hardcore_and_winding_cut_independent(L):
    for w, covs in enumerate_coverings(L).items():
        for cov in covs:
            assert cov.is_hardcore()
            cuts = cov.cut_windings() if L % 2 == 0 else [0]
            assert set(cuts) == {w}


# -- Hamiltonian ----------------------------------------------------------------

@pytest.mark.parametrize("L", [2, 4, 6, 8, 10])
def test_classical_energies(L):
    for w in (1, -1):
        assert np.array_equal(build_dimer_hamiltonian(L, 1.0, 0.0, w).diagonal, [0.0])
    assert np.allclose(build_dimer_hamiltonian(L, 1.3, 0.0, 0).diagonal, 1.3 * L)


@pytest.mark.parametrize("L", [3, 5, 7, 9])
def test_classical_energies_odd(L):
    assert np.allclose(build_dimer_hamiltonian(L, 1.0, 0.0, 0).diagonal, L)


def test_L2_hand_matrix():
    # coverings: two rungs, doubled plaquette 0, doubled plaquette 1; all at 2U
    U, G = 1.0, 1.0
    H_hand = 2 * U * np.eye(3) - G * np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]])
    e = sector_spectrum(2, U, G, 0).energies
    assert np.allclose(e, np.linalg.eigvalsh(H_hand), atol=1e-12)
    assert np.allclose(e, [2 - np.sqrt(2), 2, 2 + np.sqrt(2)], atol=1e-12)


@pytest.mark.parametrize("L", [4, 7, 10])
def test_row_sums_equal_flippable_plaquettes(L):
    H = build_dimer_hamiltonian(L, 1.0, 1.0, 0)
    A = H.hopping.to_sparse().toarray()
    covs = H.meta["coverings"]
    for a, cov in enumerate(covs):
        n_flip = sum(plaquette_flip(cov, c) is not None for c in range(L))
        assert A[:, a].sum() == n_flip
    assert np.array_equal(A, A.T)


@pytest.mark.parametrize("L", range(2, 13))
def test_flips_conserve_winding_and_hardcore(L):
    for w, covs in enumerate_coverings(L).items():
        for cov in covs:
            for c in range(L):
                new = plaquette_flip(cov, c)
                if new is None:
                    continue
                assert new.is_hardcore()
                assert plaquette_flip(new, c) == cov
                if L % 2 == 0:
                    assert set(new.cut_windings()) == {w}


def test_staggered_sectors_have_no_flips():
    for L in (4, 6, 8):
        for w in (1, -1):
            assert build_dimer_hamiltonian(L, 1.0, 1.0, w).hopping.to_sparse().nnz == 0


def test_invalid_sector():
    with pytest.raises(ValueError):
        build_dimer_hamiltonian(5, 1.0, 1.0, 1)


# -- b_L -----------------------------------------------------------------------

def test_b_gamma_and_U_independent():
    for L in (6, 10, 12):
        assert compute_b(L, 0.5) == pytest.approx(compute_b(L, 2.0), abs=1e-12)
        assert compute_b(L, 1.0, 0.3) == pytest.approx(compute_b(L, 1.0, 3.0), abs=1e-12)


def test_b_values_and_convergence():
    b = {L: compute_b(L) for L in (2, 8, 10, 12, 14)}
    assert b[2] == pytest.approx(np.sqrt(2) / 2, abs=1e-12)
    assert 0.55 <= b[12] <= 0.65
    assert abs(b[14] - b[12]) < abs(b[12] - b[10]) < abs(b[10] - b[8])


def test_b_requires_even_L():
    with pytest.raises(ValueError):
        compute_b(5)


def test_w0_energy_strictly_decreasing_in_gamma():
    g = np.linspace(0.0, 3.0, 31)
    e = [w0_ground_energy(10, 1.0, x) for x in g]
    assert np.all(np.diff(e) < 0)


def test_energy_density_approaches_linear_band():
    b = compute_b(14)
    err = [abs(w0_ground_energy(L, 1.0, 0.8) / L - (1.0 - b * 0.8)) for L in (6, 10, 14)]
    assert err[0] > err[1] > err[2]


# -- level crossing ---------------------------------------------------------------

@pytest.mark.parametrize("L", [2, 4, 6, 8, 10, 12, 14])
def test_level_crossing(L):
    lc = locate_level_crossing(L, 1.0)
    assert lc.gamma_c * lc.b_L == pytest.approx(1.0, abs=1e-10)
    assert lc.slope_below == 0.0
    assert lc.slope_above == pytest.approx(-lc.b_L, rel=1e-6)


def test_level_crossing_scales_with_U():
    assert locate_level_crossing(8, 2.5).gamma_c == pytest.approx(2.5 * locate_level_crossing(8, 1.0).gamma_c)


def test_level_crossing_large_L_near_paper_value():
    assert locate_level_crossing(14).gamma_c == pytest.approx(1 / 0.6, rel=0.02)


def test_level_crossing_bracket_error():
    with pytest.raises(NumericalError, match="bracket"):
        locate_level_crossing(6, 1.0, bracket=(0.01, 0.5))
