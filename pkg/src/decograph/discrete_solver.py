"""Normalized-Laplacian spectra and the equilateral dispersion correspondence."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import DiscreteGraph, ModelSpec, build_discrete_truncation, normalized_laplacian_matrix
from .metric_solver import Spectrum, SolverError
from .words import Word

MU_MERGE_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteSpectrum:
    """All eigenvalues (with repetition) of a normalized Laplacian, sorted."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        # round-off at the spectral edges
        v[np.abs(v) < 1e-12] = 0.0
        v[np.abs(v - 2) < 1e-12] = 2.0
        object.__setattr__(self, "values", v)
        if len(v) and (v[0] < -1e-9 or v[-1] > 2 + 1e-9):
            raise SolverError("normalized Laplacian eigenvalues must lie in [0, 2]")

    def __len__(self) -> int:
        return len(self.values)

    def multiplicity(self, mu: float, tol: float = MU_MERGE_TOL) -> int:
        return int(np.sum(np.abs(self.values - mu) <= tol))

    def count(self, mu) -> np.ndarray | int:
        out = np.searchsorted(self.values, mu, side="right")
        return int(out) if np.ndim(out) == 0 else out

    def distinct(self, tol: float = MU_MERGE_TOL) -> list[tuple[float, int]]:
        out: list[list] = []
        for v in self.values:
            if out and v - out[-1][0] <= tol:
                out[-1][1] += 1
            else:
                out.append([v, 1])
        return [(float(a), int(b)) for a, b in out]

    def to_csv(self) -> str:
        lines = ["mu,multiplicity"]
        lines += [f"{mu:.12g},{m}" for mu, m in self.distinct()]
        return "\n".join(lines) + "\n"


def symmetric_eigenvalues(matrix, tol: float = 1e-12) -> np.ndarray:
    """Full sorted spectrum of a real symmetric matrix (LAPACK tridiagonal reduction)."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SolverError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise SolverError("matrix is not symmetric")
    return np.linalg.eigvalsh(0.5 * (a + a.T))


def graph_spectrum(g: DiscreteGraph) -> DiscreteSpectrum:
    return DiscreteSpectrum(symmetric_eigenvalues(normalized_laplacian_matrix(g)))


def discrete_spectrum(model: ModelSpec, word: Word, boundary: str = "free") -> DiscreteSpectrum:
    return graph_spectrum(build_discrete_truncation(model, word, boundary))


def dispersion_k(mu: float, m: int) -> float:
    """The k in [pi m, pi (m+1)] with 1 - cos k = mu."""
    if m < 0:
        raise SolverError("branch index must be non-negative")
    if not -1e-12 <= mu <= 2 + 1e-12:
        raise SolverError(f"mu={mu} outside [0, 2]")
    t = math.acos(min(1.0, max(-1.0, 1.0 - mu)))
    return math.pi * m + t if m % 2 == 0 else math.pi * (m + 1) - t


def metric_spectrum_via_correspondence(
    ds: DiscreteSpectrum,
    edge_count: int,
    k_max: float,
    tol: float = MU_MERGE_TOL,
) -> Spectrum:
    """Unit-length equilateral metric spectrum rebuilt from the discrete one.

    Interior discrete eigenvalues map to one k per branch; eigenvalues at
    k = pi m are inserted so that the count of lambda <= (pi m)^2 equals
    edge_count * m + (multiplicity of 1 - cos(pi m) in ``ds``).
    """
    interior = ds.values[(ds.values > tol) & (ds.values < 2 - tol)]
    lams: list[tuple[float, int]] = []
    below = 0
    m = 0
    while math.pi * m <= k_max:
        endpoint = 0.0 if m % 2 == 0 else 2.0
        target = edge_count * m + ds.multiplicity(endpoint, tol)
        mult = target - below
        if mult < 0:
            raise SolverError(f"correspondence count mismatch at k = {m} pi")
        if mult:
            lams.append(((math.pi * m) ** 2, mult))
        below += mult
        ks = [dispersion_k(mu, m) for mu in interior]
        ks = [k for k in ks if k <= k_max]
        for k in sorted(ks):
            if lams and abs(k * k - lams[-1][0]) <= tol:
                lams[-1] = (lams[-1][0], lams[-1][1] + 1)
            else:
                lams.append((k * k, 1))
        below += len(interior)
        m += 1
    spec = Spectrum.from_values([], k_max)
    if lams:
        spec = Spectrum(np.array([x for x, _ in lams]), np.array([c for _, c in lams]), k_max)
    return spec


def discrete_ids(model: ModelSpec, words: Sequence[Word], boundary: str = "free"):
    """Normalized counting functions mu -> #{eigenvalues <= mu} / |V|, one per word."""
    from .labels import IDSCurve

    curves = []
    for w in words:
        ds = discrete_spectrum(model, w, boundary)
        distinct = ds.distinct()
        bp = np.array([mu for mu, _ in distinct])
        vals = np.cumsum([c for _, c in distinct]) / len(ds)
        curves.append(IDSCurve(bp, vals, float(len(ds)), len(w) - 1, kind="discrete"))
    return curves


@dataclass(frozen=True)
class CorrespondenceReport:
    """Equilateral metric spectrum against the normalized Laplacian spectrum."""

    max_mu_error: float
    branch_sizes: tuple[int, ...]
    counts: tuple[tuple[int, int, int], ...]  # (m, metric count at (pi m)^2, |E| m + mult)

    @property
    def counts_match(self) -> bool:
        return all(a == b for _, a, b in self.counts)

    def ok(self, tol: float = 1e-8) -> bool:
        return self.max_mu_error <= tol and self.counts_match

    def to_dict(self) -> dict:
        return {
            "max_mu_error": self.max_mu_error,
            "branch_sizes": list(self.branch_sizes),
            "counts": [{"m": m, "metric": a, "predicted": b} for m, a, b in self.counts],
            "counts_match": self.counts_match,
        }


def correspondence_report(g: DiscreteGraph, branches: int = 2, k_tol: float = 1e-7) -> CorrespondenceReport:
    """Solve the unit-length metric graph on the same combinatorics and compare.

    On each branch k in (pi m, pi (m+1)) the values 1 - cos k must reproduce
    the discrete eigenvalues away from {0, 2}; at k = pi m the metric count
    must equal |E| m plus the multiplicity of 1 - cos(pi m).
    """
    from .graphs import metric_graph
    from .metric_solver import metric_spectrum_general

    if np.any(g.external_degree):
        raise SolverError("the correspondence needs a graph without external half-edges")
    ds = graph_spectrum(g)
    mg = metric_graph(g.n_vertices, [(u, v, 1.0) for u, v in g.edge_list()])
    spec = metric_spectrum_general(mg, math.pi * branches + 0.01)
    ks = np.sqrt(np.maximum(spec.expanded(), 0.0))
    interior = ds.values[(ds.values > MU_MERGE_TOL) & (ds.values < 2 - MU_MERGE_TOL)]
    worst = 0.0
    sizes = []
    for m in range(branches):
        sel = ks[(ks > math.pi * m + k_tol) & (ks < math.pi * (m + 1) - k_tol)]
        mus = np.sort(1 - np.cos(sel))
        sizes.append(len(mus))
        if len(mus) != len(interior):
            worst = math.inf
            continue
        if len(mus):
            worst = max(worst, float(np.max(np.abs(mus - interior))))
    counts = []
    for m in range(1, branches + 1):
        metric = spec.count((math.pi * m) ** 2 * (1 + 1e-12))
        endpoint = 0.0 if m % 2 == 0 else 2.0
        counts.append((m, int(metric), g.n_edges * m + ds.multiplicity(endpoint)))
    return CorrespondenceReport(worst, tuple(sizes), tuple(counts))
