"""Acceptance criteria, each at its stated tolerance.  One verdict line per
criterion is printed in the terminal summary."""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from decograph.discrete_solver import correspondence_report, discrete_ids
from decograph.graphs import (
    ModelSpec,
    average_vertex_count,
    build_discrete_truncation,
    build_metric_truncation,
    comb_model,
    discrete_graph,
    loop,
    metric_graph,
    normalized_length,
    single_vertex,
    star,
)
from decograph.labels import (
    IDSCurve,
    detect_gaps,
    discrete_label_set,
    ids_metric,
    label_lattice_sturmian,
    match_gap_label,
    measure_jump,
    predict_jumps,
    truncation_word,
)
from decograph.metric_solver import comb_spectrum_fast, fd_oracle, metric_spectrum_general
from decograph.nodal import schwartzman_identity_check, sturm_check, verify_counting_lemma
from decograph.words import (
    GOLDEN,
    SILVER,
    SturmianParameters,
    Word,
    adjacent_one_separations,
    empirical_frequency,
    generate_word,
    letter_frequencies,
)

PI = math.pi
GP = SturmianParameters(GOLDEN)
COMB = comb_model(1.0, 1.0, GP)


@pytest.fixture(scope="module")
def golden_curves():
    curves = []
    for b in ("kirchhoff", "dirichlet"):
        curves += ids_metric(COMB, GP, [200, 400], 40.0, b).curves
    return curves


@pytest.fixture(scope="module")
def golden_gaps(golden_curves):
    return [g for g in detect_gaps(golden_curves, (0.0, 40.0)) if g.stability == "stable"]


def test_1_correspondence(criterion):
    start = time.perf_counter()
    graphs = {f"comb n={n}": build_discrete_truncation(COMB, generate_word(GP, 0, n)) for n in (10, 20)}
    graphs["P5"] = discrete_graph(5, [(i, i + 1) for i in range(4)])
    graphs["C3"] = discrete_graph(3, [(0, 1), (1, 2), (2, 0)])
    graphs["C4"] = discrete_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    graphs["K1,4"] = discrete_graph(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
    reports = {name: correspondence_report(g, branches=2) for name, g in graphs.items()}
    elapsed = time.perf_counter() - start
    worst = max(r.max_mu_error for r in reports.values())
    ok = all(r.ok(1e-8) for r in reports.values()) and elapsed < 30
    criterion(1, ok, f"max |1-cos k - mu| = {worst:.2e}, counts at pi^2, 4pi^2 exact: "
                     f"{all(r.counts_match for r in reports.values())}, {elapsed:.1f} s")
    assert ok, {k: r.to_dict() for k, r in reports.items()}


def test_2_metric_gap_labels(criterion, golden_curves, golden_gaps):
    lattice = label_lattice_sturmian(GOLDEN, 1 + GOLDEN, 50, 50, 10.0)
    matches = [match_gap_label(g, lattice) for g in golden_gaps]
    worst = max(m.residual for m in matches)
    ok = len(golden_gaps) >= 3 and worst <= 1e-3
    criterion(2, ok, f"{len(golden_gaps)} stable gaps in [0,40], worst label residual {worst:.2e}")
    for g, m in zip(golden_gaps, matches):
        print(f"  gap ({g.lo:.4f}, {g.hi:.4f}) N={g.ids_value:.6f} -> (n,m)=({m.n},{m.m}) residual {m.residual:.2e}")
    assert ok


def test_3_discrete_gap_labels(criterion):
    curves = []
    for n in (500, 1000):
        w = truncation_word(GP, n)
        for b in ("free", "dirichlet"):
            c = discrete_ids(COMB, [w], b)[0]
            curves.append(IDSCurve(c.breakpoints, c.values, c.normalization, c.size, "discrete", b))
    gaps = [g for g in detect_gaps(curves, (0.0, 2.0)) if g.stability == "stable"]
    lattice = discrete_label_set(GOLDEN, average_vertex_count(COMB, letter_frequencies(GP)))
    worst = max(match_gap_label(g, lattice).residual for g in gaps) if gaps else math.inf
    ok = len(gaps) >= 1 and worst <= 1e-3
    criterion(3, ok, f"{len(gaps)} stable discrete gaps, worst label residual {worst:.2e}")
    assert ok


def test_4_jumps(criterion):
    preds = predict_jumps(GOLDEN, 1.0, 1.0, m_max=3, n_max=7)
    family_ok = all(
        p.case == "one" and p.delta_N == pytest.approx((1 - GOLDEN) / (1 + GOLDEN), abs=1e-12) for p in preds
    ) and [p.energy for p in preds] == pytest.approx([(PI * (2 * m + 1) / 2) ** 2 for m in range(4)])
    golden = measure_jump(COMB, GP, (PI / 2) ** 2, [400]).value
    golden_ok = abs(golden - 0.2360679775) <= 0.01

    rng = np.random.default_rng(2024)
    energies = [float(E) for E in rng.uniform(0.1, 40.0, 40)
                if min(abs(E - p.energy) for p in preds) > 1e-2][:10]
    off = [measure_jump(COMB, GP, E, [400]) for E in energies]
    off_ok = len(off) == 10 and all(m.value <= 2 / m.lengths[-1] for m in off)

    sp = SturmianParameters(SILVER)
    silver_model = comb_model(1.0, 1.5, sp)
    silver_preds = [p for p in predict_jumps(SILVER, 1.5, 1.0, m_max=4, n_max=6) if p.energy <= PI**2 + 1e-9]
    silver_rows = []
    for p in silver_preds:
        meas = measure_jump(silver_model, sp, p.energy, [400]).value
        silver_rows.append((p.case, p.energy, p.delta_N, meas))
    silver_ok = any(c == "both" for c, *_ in silver_rows) and all(abs(m - d) <= 0.01 for _, _, d, m in silver_rows)

    ok = family_ok and golden_ok and off_ok and silver_ok
    criterion(4, ok, f"golden jump at (pi/2)^2 measured {golden:.5f} vs 0.23607; "
                     f"off-prediction max {max(m.value * m.lengths[-1] for m in off):.0f}/|Gamma|; silver "
                     + ", ".join(f"{c} E={E:.4f} {m:.5f} vs {d:.5f}" for c, E, d, m in silver_rows))
    assert ok


def test_5_counting_lemma_and_sturm(criterion):
    rng = np.random.default_rng(5)
    energies = [-1.0, 1.8, 3.3, 5.18, 20.0, 24.5]
    lemma = []
    for _ in range(20):
        w = generate_word(SturmianParameters(GOLDEN, float(rng.uniform())), 0, 2000)
        t = int(rng.integers(1, 9))
        E = energies[int(rng.integers(len(energies)))]
        lemma.append(verify_counting_lemma(COMB, w, t, E).equal)
    sturm = []
    while len(sturm) < 20:
        t = int(rng.integers(1, 9))
        rep = sturm_check(float(rng.uniform(0.5, 2.0)), list(rng.uniform(-5, 5, t - 1)),
                          float(rng.uniform(-5, 5)), float(rng.uniform(-4, 60)))
        sturm.append(rep.holds)
    ok = all(lemma) and all(sturm)
    criterion(5, ok, f"counting lemma {sum(lemma)}/20 exact, Sturm {sum(sturm)}/20 exact")
    assert ok


def test_6_schwartzman(criterion, golden_gaps):
    energies = [g.midpoint for g in golden_gaps][:3]
    reps = [schwartzman_identity_check(COMB, GP, E, 500) for E in energies]
    ok = len(reps) == 3 and all(r.residual <= 0.05 and r.lattice_distance <= 1e-2 for r in reps)
    criterion(6, ok, "; ".join(
        f"E={r.energy:.4f}: Z/t={r.zero_rate:.4f}, N*Lbar={r.predicted:.4f}, lattice {r.lattice_point}" for r in reps))
    assert ok


def test_7_frequencies(criterion):
    rows = []
    for alpha in (GOLDEN, SILVER):
        w = generate_word(SturmianParameters(alpha), 0, 10**6 - 1)
        for pf in adjacent_one_separations(alpha):
            emp = empirical_frequency(w, pf.pattern.letters)
            rows.append((pf.pattern.to_text(), pf.frequency, emp))
    worst = max(abs(a - b) for _, a, b in rows)
    ok = worst <= 1e-3
    criterion(7, ok, ", ".join(f"{p}: {a:.5f}/{b:.5f}" for p, a, b in rows) + f" (worst {worst:.1e})")
    assert ok


def test_8_solver_cross_validation(criterion):
    fast_err = 0.0
    for letters in [(1, 1), (1, 0, 1), (0, 1, 1, 0, 1), (1, 1, 0, 1, 1, 0, 1), (1, 0, 1, 1, 0, 1, 0, 1, 1)]:
        w = Word(letters)
        a = comb_spectrum_fast(1.0, 1.0, w, "kirchhoff", 4 * PI).expanded()
        b = metric_spectrum_general(build_metric_truncation(COMB, w), 4 * PI).expanded()
        fast_err = max(fast_err, math.inf if len(a) != len(b) else float(np.max(np.abs(a - b))))
    graphs = {
        "interval": metric_graph(2, [(0, 1, 1.0)]),
        "triangle": metric_graph(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]),
        "comb 101": build_metric_truncation(COMB, Word((1, 0, 1))),
        "star decoration": build_metric_truncation(ModelSpec((single_vertex(0), star([0.5, 0.8], 1)), 1.0), Word((1, 0, 1))),
        "loop decoration": build_metric_truncation(ModelSpec((single_vertex(0), loop(1.3, 1)), 1.0), Word((0, 1, 1))),
    }
    # the three-point scheme errs by about h^2 lambda^2 / 12, so compare the
    # lowest eight eigenvalues below lambda = 100 where that is < 1e-3
    fd_err, n_compared = 0.0, 0
    for g in graphs.values():
        fd = fd_oracle(g, 1e-3, 8)
        fd = fd[fd <= 100.0]
        ex = metric_spectrum_general(g, math.sqrt(fd[-1]) + 0.5).expanded()[: len(fd)]
        fd_err = max(fd_err, float(np.max(np.abs(fd - ex))))
        n_compared += len(fd)
    ok = fast_err <= 1e-9 and fd_err <= 1e-3
    criterion(8, ok, f"fast vs general {fast_err:.1e} on 5 combs; general vs FD (h=1e-3) {fd_err:.1e} on 5 graphs, {n_compared} eigenvalues")
    assert ok


def test_9_ids_convergence(criterion, golden_curves):
    kir = [c for c in golden_curves if c.variant == "kirchhoff"]
    d = kir[0].sup_distance(kir[1], 0.0, 40.0)
    ok = d <= 0.01
    criterion(9, ok, f"sup |N_200 - N_400| on [0,40] = {d:.4f}")
    assert ok
