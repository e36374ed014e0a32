from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decograph.graphs import ModelSpec, bare_chain_model, comb_model, loop, robin, single_vertex, star, tooth, triangle
from decograph.metric_solver import SolverError, fd_oracle, half_line_solution_data
from decograph.nodal import (
    PruferTrace,
    decoration_nodal,
    decoration_solution,
    direct_zero_counts,
    nearest_rotation_lattice_point,
    prufer_trace,
    schwartzman_identity_check,
    sturm_check,
    verify_counting_lemma,
    zeros_on_edge,
    zeros_on_interval,
)
from decograph.words import GOLDEN, SturmianParameters, Word, generate_word

PI = math.pi
GP = SturmianParameters(GOLDEN)
COMB = comb_model(1.0, 1.0, GP)
# energies inside gaps of the golden comb (L = ell = 1), plus one below the spectrum
GAP_ENERGIES = [-1.0, 1.8, 3.3, 5.18, 20.0, 24.5]
LONG_WORD = generate_word(GP, 0, 1200)


def sampled_zeros(f0, fp0, E, length, n=200001):
    """Sign changes of the closed-form solution on a fine grid (oracle)."""
    x = np.linspace(0.0, length, n)[1:]
    if E > 0:
        k = math.sqrt(E)
        y = f0 * np.cos(k * x) + fp0 / k * np.sin(k * x)
    else:
        kap = math.sqrt(-E)
        y = f0 * np.cosh(kap * x) + fp0 / kap * np.sinh(kap * x)
    y0 = np.concatenate([[f0], y])
    return int(np.sum(np.sign(y0[:-1]) * np.sign(y0[1:]) < 0))


# ----------------------------------------------------------------- zero counts

def test_zeros_on_interval_examples():
    assert zeros_on_interval(1.0, 0.0, PI, 1.0) == 1
    assert zeros_on_interval(0.0, 1.0, PI, 1.0) == 1
    assert zeros_on_interval(1.0, 0.0, 0.1, 1.0) == 0
    with pytest.raises(ValueError):
        zeros_on_interval(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        zeros_on_interval(0.0, 0.0, 1.0, 1.0)


def test_zeros_on_edge_negative_energy():
    assert zeros_on_edge(1.0, -2.0, -1.0, 3.0) == 1  # cosh - 2 sinh crosses zero
    assert zeros_on_edge(1.0, -0.5, -1.0, 3.0) == 0
    assert zeros_on_edge(1.0, -1.0, 0.0, 2.0) == 1
    assert zeros_on_edge(0.0, 1.0, -1.0, 2.0) == 0


@settings(max_examples=150, deadline=None)
@given(
    st.floats(-3, 3).filter(lambda x: abs(x) > 1e-3),
    st.floats(-20, 20),
    st.floats(-10, 60).filter(lambda e: abs(e) > 1e-3),
    st.floats(0.1, 3.0),
)
def test_zero_count_matches_sampling(f0, fp0, E, length):
    exact = zeros_on_edge(f0, fp0, E, length)
    # skip cases where a zero sits within one grid cell of the right end
    k = math.sqrt(abs(E))
    if E > 0:
        end = f0 * math.cos(k * length) + fp0 / k * math.sin(k * length)
        slope = math.hypot(f0 * k, fp0)
    else:
        end = f0 * math.cosh(k * length) + fp0 / k * math.sinh(k * length)
        slope = math.hypot(f0 * k, fp0) * math.cosh(k * length)
    if abs(end) < 1e-4 * slope:
        return
    assert exact == sampled_zeros(f0, fp0, E, length)


# --------------------------------------------------------- decoration surplus

def test_tooth_nodal_examples():
    k = PI / 4
    nd = decoration_nodal(tooth(1.0), k * k)
    assert (nd.zero_count, nd.spectral_count, nd.surplus) == (0, 1, 0)
    k = 3 * PI / 4
    nd = decoration_nodal(tooth(1.0), k * k)
    assert (nd.zero_count, nd.spectral_count, nd.surplus) == (1, 2, 0)
    # the zero of cos(k (ell - x)) at x = ell/3
    sol = decoration_solution(tooth(1.0), k * k)
    assert sol.m == pytest.approx(k * math.tan(k))
    nd = decoration_nodal(single_vertex(), 5.0)
    assert (nd.zero_count, nd.spectral_count, nd.surplus) == (0, 1, 0)


def test_nudge_is_reported():
    # the tooth solution vanishes at the base exactly at k ell = pi/2
    nd = decoration_nodal(tooth(1.0), (PI / 2) ** 2)
    assert 0 < nd.perturbation <= 1e-8


def test_nodal_data_invariant():
    from decograph.nodal import NodalData

    with pytest.raises(ValueError):
        NodalData(1.0, 2, 0, spectral_count=1)
    with pytest.raises(ValueError):
        NodalData(1.0, -1, -1, spectral_count=1)


@pytest.mark.parametrize("E", [0.7, 3.0, 11.0, 27.0, 45.0])
def test_tree_decorations_have_no_surplus(E):
    for d in (tooth(0.7), tooth(1.9), star([0.4, 0.9, 1.3])):
        assert decoration_nodal(d, E).surplus == 0


@pytest.mark.parametrize("E", [5.0, 12.0, 30.0, 50.0, 70.0])
def test_loop_surplus_against_finite_elements(E):
    d = loop(1.0)
    nd = decoration_nodal(d, E)
    assert nd.surplus in (0, 1)
    sol = decoration_solution(d, E)
    g = sol.graph.with_conditions({sol.graph.boundary_vertices[0]: robin(sol.m)})
    fd = fd_oracle(g, 1e-3, 12)
    # E itself is an eigenvalue of the Robin problem; count FE eigenvalues up to it
    n_fd = int(np.sum(fd <= E + 0.05))
    assert np.min(np.abs(fd - E)) < 0.05
    assert n_fd == nd.spectral_count
    assert nd.zero_count - (n_fd - 1) == nd.surplus


def test_loop_has_positive_surplus_somewhere():
    assert any(decoration_nodal(loop(1.0), E).surplus == 1 for E in (5.0, 12.0, 30.0, 50.0, 70.0))


# ------------------------------------------------------------ counting lemma

def test_counting_lemma_small_examples():
    rep = verify_counting_lemma(COMB, LONG_WORD, 2, 1.8)
    assert rep.equal and rep.sturm_holds
    chain = bare_chain_model(1.0)
    rep = verify_counting_lemma(chain, Word((0,) * 1200), 5, -1.0)
    assert rep.equal and rep.lhs == rep.n_horizontal


def test_counting_lemma_for_cycle_and_star_decorations():
    for deco in (loop(1.3, 1), star([0.5, 0.8], 1), triangle(0.6, 1)):
        model = ModelSpec((single_vertex(0), deco), 1.0)
        for E in (-1.0, 2.0):
            try:
                rep = verify_counting_lemma(model, LONG_WORD, 6, E)
            except SolverError:
                continue  # E happens to lie in the spectrum of this model
            assert rep.equal, rep.to_dict()


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 0.999), st.integers(1, 8), st.sampled_from(GAP_ENERGIES))
def test_counting_lemma_random_instances(theta, t, E):
    w = generate_word(SturmianParameters(GOLDEN, theta), 0, 1200)
    rep = verify_counting_lemma(COMB, w, t, E)
    assert rep.equal, rep.to_dict()
    assert rep.sturm_holds


@settings(max_examples=20, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=0, max_size=8),
    st.floats(-3, 3),
    st.floats(-2, 40).filter(lambda e: abs(e) > 1e-3),
    st.floats(0.5, 2.0),
)
def test_sturm_oscillation_on_random_robin_intervals(couplings, gamma0, E, L):
    try:
        rep = sturm_check(L, couplings, gamma0, E)
    except (SolverError, ZeroDivisionError):
        return  # shooting landed on a vertex zero: E is a Dirichlet eigenvalue of a piece
    assert rep.holds, (rep.count, rep.zeros)


# -------------------------------------------------------------- Pruefer angle

@pytest.fixture(scope="module")
def golden_trace():
    return prufer_trace(COMB, LONG_WORD, 1.8, 50)


def test_prufer_floor_equals_zero_count(golden_trace):
    assert np.array_equal(golden_trace.floor_at_integers(), golden_trace.zero_counts)
    assert np.all(np.diff(np.floor(golden_trace.lifted)) >= 0)
    assert np.all(np.diff(golden_trace.lifted) < 0.5)


def test_prufer_trace_csv(golden_trace):
    lines = golden_trace.to_csv().splitlines()
    assert lines[0] == "t,phi_lifted,zero_count"
    assert len(lines) == len(golden_trace.times) + 1


def test_prufer_shift_consistency():
    E = 3.3
    trace = prufer_trace(COMB, LONG_WORD, E, 2)
    shifted = Word(LONG_WORD.letters[1:])
    t1 = prufer_trace(COMB, shifted, E, 1)
    at_one = trace.lifted[np.nonzero(np.isclose(trace.times, 1.0))[0][-1]]
    d = (at_one - t1.lifted[0]) % 1.0
    assert min(d, 1 - d) < 1e-6


def test_prufer_bare_chain_negative_energy_is_constant():
    trace = prufer_trace(bare_chain_model(1.0), Word((0,) * 1200), -1.0, 10)
    np.testing.assert_allclose(trace.lifted, trace.lifted[0], atol=1e-9)
    assert trace.zero_counts[-1] == 0


@pytest.mark.parametrize("deco", [star([0.5, 1.7], 1), tooth(2.5)], ids=["star", "long-tooth"])
def test_prufer_with_other_decorations(deco):
    model = ModelSpec((single_vertex(0), deco), 1.0)
    trace = prufer_trace(model, LONG_WORD, -0.5, 20)
    assert np.array_equal(trace.floor_at_integers(), trace.zero_counts)


def test_direct_counts_match_sampled_solution():
    E = 1.8
    data = half_line_solution_data(COMB, LONG_WORD, E, 20)
    z = direct_zero_counts(COMB, LONG_WORD, E, data, 20)
    k = math.sqrt(E)
    tooth_zeros = sampled_zeros(1.0, k * math.tan(k) * -1 * -1, E, 1.0)  # f = cos(k(1-x)) / cos k
    total = 0
    for j in range(20):
        total += sampled_zeros(1.0, float(data.right[j]), E, 1.0)
        if LONG_WORD.letters[j]:
            total += tooth_zeros
        assert z[j + 1] == total


# --------------------------------------------------------------- Schwartzman

def test_lattice_point_search():
    (n, m), d = nearest_rotation_lattice_point(GOLDEN, 2 * GOLDEN + 1)
    assert (n, m) == (2, 1) and d < 1e-12


def test_schwartzman_golden_first_gap():
    rep = schwartzman_identity_check(COMB, GP, 1.8, 500)
    assert rep.residual <= 0.05
    assert rep.lattice_distance <= 1e-2
    assert rep.lattice_point == (1, 0)


def test_schwartzman_bare_chain_below_spectrum():
    rep = schwartzman_identity_check(bare_chain_model(1.0), GP, -1.0, 200)
    assert rep.zero_rate == 0.0 and rep.predicted == 0.0
