"""Eigenvalues of compact metric graphs.

Two exact counting devices drive every root search here:

* eigenphase winding of the unitary bond evolution U(k) = D(k) S.  All
  eigenphases increase with k, so the number of phases that cross zero on
  (k0, k] follows from the unwrapped phase sum (k - k0) * sum(bond lengths)
  and the principal phases at both ends;
* the Dirichlet-to-Neumann (DtN) inertia count: with every edge solved
  exactly, the quadratic form of H - E restricted to vertex values is a
  finite symmetric matrix Q(E) and

      #{eigenvalues < E} = #{Dirichlet edge eigenvalues < E} + #{negative eigenvalues of Q(E)}.

Roots are then bracketed by bisection on the integer count, which cannot
miss a root and returns multiplicities as count jumps.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .graphs import (
    DIRICHLET,
    KIRCHHOFF,
    CompactMetricGraph,
    Decoration,
    GraphError,
    ModelSpec,
    build_metric_truncation,
)
from .words import Word


class SolverError(RuntimeError):
    pass


class GridTooCoarse(SolverError):
    pass


DEFAULT_TOL = 1e-12
MERGE_TOL = 1e-7
# half-width of the window placed around energies where the count formula is singular
SINGULAR_GUARD = 1e-10


@dataclass(frozen=True)
class SolveOptions:
    k_step: float | None = None  # None: pi / (8 * total length)
    tol: float = DEFAULT_TOL
    max_dim: int = 200
    merge_tol: float = MERGE_TOL

    def __post_init__(self):
        if self.k_step is not None and not self.k_step > 0:
            raise SolverError("k_step must be positive")
        if not self.tol > 0:
            raise SolverError("tol must be positive")


@dataclass(frozen=True)
class Spectrum:
    """Sorted distinct eigenvalues with multiplicities, complete up to k_max**2."""

    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    k_max: float

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        mult = np.asarray(self.multiplicities, dtype=int)
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "multiplicities", mult)
        if ev.shape != mult.shape:
            raise SolverError("eigenvalue and multiplicity arrays differ in length")
        if len(ev) > 1 and np.any(np.diff(ev) <= 0):
            raise SolverError("eigenvalues must be strictly increasing")
        if np.any(mult < 1):
            raise SolverError("multiplicities must be positive")

    @classmethod
    def from_values(cls, values: Iterable[float], k_max: float, merge_tol: float = 0.0) -> "Spectrum":
        vals = np.sort(np.asarray(list(values), dtype=float))
        ev, mult = [], []
        for v in vals:
            if ev and v - ev[-1] <= merge_tol:
                mult[-1] += 1
            else:
                ev.append(v)
                mult.append(1)
        return cls(np.array(ev), np.array(mult, dtype=int), k_max)

    @property
    def total(self) -> int:
        return int(self.multiplicities.sum())

    def expanded(self) -> np.ndarray:
        return np.repeat(self.eigenvalues, self.multiplicities)

    def count(self, E) -> np.ndarray | int:
        """#{lambda <= E} with multiplicity."""
        cum = np.concatenate([[0], np.cumsum(self.multiplicities)])
        idx = np.searchsorted(self.eigenvalues, E, side="right")
        out = cum[idx]
        return int(out) if np.ndim(out) == 0 else out

    def multiplicity_at(self, E: float, tol: float) -> int:
        sel = np.abs(self.eigenvalues - E) <= tol
        return int(self.multiplicities[sel].sum())

    def restricted(self, lam_max: float) -> "Spectrum":
        sel = self.eigenvalues <= lam_max
        return Spectrum(self.eigenvalues[sel], self.multiplicities[sel], math.sqrt(max(lam_max, 0.0)))

    def to_csv(self, column: str = "lambda") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([column, "multiplicity"])
        for lam, m in zip(self.eigenvalues, self.multiplicities):
            w.writerow([f"{lam:.12g}", int(m)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "multiplicities": [int(m) for m in self.multiplicities],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# ------------------------------------------------------------------ root driver

def _roots_from_counter(
    counter: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    step: float,
    tol: float,
    singular: Sequence[float] = (),
    guard: float = SINGULAR_GUARD,
) -> list[tuple[float, int]]:
    """Locate all jumps of a non-decreasing integer counter on (lo, hi].

    ``counter`` maps an array of abscissae to counts and need only be
    correct away from ``singular`` points; a window of half-width ``guard``
    is cut around each of those and any jump across it is reported exactly
    at the singular point.  Returns (position, jump) pairs.
    """
    n_pts = max(2, int(math.ceil((hi - lo) / step)) + 1)
    grid = np.linspace(lo, hi, n_pts)
    sing = np.array(sorted(s for s in set(singular) if lo + guard < s < hi - guard))
    # flag[i] marks the interval (grid[i], grid[i+1]) as a guard window
    flag = np.zeros(len(grid), dtype=bool)
    if len(sing):
        near = np.min(np.abs(grid[:, None] - sing[None, :]), axis=1) <= 2 * guard
        near[0] = near[-1] = False
        pts = np.concatenate([grid[~near], sing - guard, sing + guard])
        marks = np.concatenate([np.zeros((~near).sum(), bool), np.ones(len(sing), bool), np.zeros(len(sing), bool)])
        order = np.argsort(pts, kind="stable")
        grid, flag = pts[order], marks[order]
    counts = np.asarray(counter(grid), dtype=np.int64)
    if np.any(np.diff(counts) < 0):
        raise SolverError("counting function decreased; numerical breakdown")
    roots: list[tuple[float, int]] = []
    active = []
    for i, (a, b, ca, cb) in enumerate(zip(grid[:-1], grid[1:], counts[:-1], counts[1:])):
        if cb == ca:
            continue
        if flag[i]:
            roots.append((a + guard, int(cb - ca)))
        else:
            active.append((a, b, ca, cb))
    while active:
        done = [iv for iv in active if iv[1] - iv[0] <= tol]
        roots += [(0.5 * (a + b), int(cb - ca)) for a, b, ca, cb in done]
        active = [iv for iv in active if iv[1] - iv[0] > tol]
        if not active:
            break
        mids = np.array([0.5 * (a + b) for a, b, _, _ in active])
        cm = np.asarray(counter(mids), dtype=np.int64)
        nxt = []
        for (a, b, ca, cb), m, c in zip(active, mids, cm):
            if not ca <= c <= cb:
                raise SolverError("counting function not monotone during bisection")
            if c > ca:
                nxt.append((a, m, ca, c))
            if cb > c:
                nxt.append((m, b, c, cb))
        active = nxt
    roots.sort()
    return roots


def _merge(roots: list[tuple[float, int]], merge_tol: float) -> list[tuple[float, int]]:
    out: list[list] = []
    for x, m in roots:
        if out and x - out[-1][0] <= merge_tol:
            total = out[-1][1] + m
            out[-1][0] = (out[-1][0] * out[-1][1] + x * m) / total
            out[-1][1] = total
        else:
            out.append([x, m])
    return [(x, m) for x, m in out]


# -------------------------------------------------------- scattering formulation

def _bonds(g: CompactMetricGraph):
    """Directed bonds b = 2e (u->v) and 2e+1 (v->u) with their lengths."""
    src, dst, lengths = [], [], []
    for u, v, length in g.edges:
        src += [u, v]
        dst += [v, u]
        lengths += [length, length]
    return np.array(src), np.array(dst), np.array(lengths)


def bond_scattering_matrix(g: CompactMetricGraph) -> np.ndarray:
    """k-independent vertex scattering matrix on directed bonds.

    Entry S[b', b] is the amplitude scattered from incoming bond b into
    outgoing bond b' at the vertex where b ends.
    """
    if any(c.kind == "robin" for c in g.conditions):
        raise SolverError("Robin vertices make scattering k-dependent; use the DtN route")
    src, dst, _ = _bonds(g)
    nb = len(src)
    deg = g.degrees
    S = np.zeros((nb, nb))
    for b in range(nb):
        v = dst[b]
        reverse = b ^ 1
        for b2 in np.nonzero(src == v)[0]:
            if g.conditions[v].kind == "dirichlet":
                S[b2, b] = -1.0 if b2 == reverse else 0.0
            else:
                d = deg[v]
                S[b2, b] = 2.0 / d - (1.0 if b2 == reverse else 0.0)
    return S


def _phase_sums(S: np.ndarray, lengths: np.ndarray, ks: np.ndarray) -> np.ndarray:
    out = np.empty(len(ks))
    for i, k in enumerate(ks):
        U = np.exp(1j * k * lengths)[:, None] * S
        ph = np.mod(np.angle(np.linalg.eigvals(U)), 2 * np.pi)
        out[i] = ph.sum()
    return out


def secular_residual(g: CompactMetricGraph, k: float) -> float:
    """Smallest singular value of I - U(k)."""
    S = bond_scattering_matrix(g)
    _, _, lengths = _bonds(g)
    U = np.exp(1j * k * lengths)[:, None] * S
    return float(np.linalg.svd(np.eye(len(lengths)) - U, compute_uv=False)[-1])


def _default_step(g: CompactMetricGraph) -> float:
    return math.pi / (8.0 * g.total_length)


def metric_spectrum_general(
    g: CompactMetricGraph,
    k_max: float,
    opts: SolveOptions | None = None,
    k_min: float = 0.0,
) -> Spectrum:
    """All eigenvalues lambda = k**2 with k in [k_min, k_max].

    Kirchhoff/Dirichlet graphs use eigenphase winding; graphs with Robin
    vertices fall back to the DtN count (which also finds negative
    eigenvalues when k_min == 0).
    """
    opts = opts or SolveOptions()
    if any(c.kind == "robin" for c in g.conditions):
        return _spectrum_dtn(g, k_max, opts, k_min)
    nb = 2 * len(g.edges)
    if nb > opts.max_dim:
        raise SolverError(f"{nb} bonds exceed max_dim={opts.max_dim}")
    step = opts.k_step or _default_step(g)
    src, dst, lengths = _bonds(g)
    if step * lengths.max() >= math.pi:
        raise GridTooCoarse(f"k_step={step} lets an eigenphase advance by >= pi")
    S = bond_scattering_matrix(g)
    total = lengths.sum()
    k0 = max(k_min, 1e-4 * math.pi / g.total_length)
    theta0 = _phase_sums(S, lengths, np.array([k0]))[0]

    def counter(ks):
        ks = np.asarray(ks, dtype=float)
        th = _phase_sums(S, lengths, ks)
        raw = ((ks - k0) * total - th + theta0) / (2 * np.pi)
        out = np.rint(raw)
        if np.any(np.abs(raw - out) > 1e-6):
            raise SolverError("eigenphase count is not an integer; increase precision")
        return out.astype(np.int64)

    roots = _roots_from_counter(counter, k0, _padded(k_max), step, opts.tol) if k_max > k0 else []
    roots = _inside(_merge(roots, opts.merge_tol), k_max)
    lams = [(k * k, m) for k, m in roots]
    if k_min <= 0.0 and not any(c.kind == "dirichlet" for c in g.conditions):
        lams.insert(0, (0.0, 1))
    return _to_spectrum(lams, k_max)


def _padded(k_max: float) -> float:
    # scan a little past k_max so a root sitting exactly on it is resolved
    return k_max * (1 + 1e-7) + 4 * SINGULAR_GUARD


def _inside(roots, k_max: float):
    return [(k, m) for k, m in roots if k <= k_max * (1 + 1e-9) + 1e-12]


def _to_spectrum(lams, k_max) -> Spectrum:
    lams = sorted(lams)
    if not lams:
        return Spectrum(np.zeros(0), np.zeros(0, dtype=int), k_max)
    return Spectrum(np.array([x for x, _ in lams]), np.array([m for _, m in lams], dtype=int), k_max)


# ------------------------------------------------------------------ DtN counting

def _edge_dtn(E: float, length: float) -> tuple[float, float]:
    """(diagonal, off-diagonal) of the edge form matrix of H - E.

    For an edge carrying the exact solution with end values (a, b), the form
    int |f'|^2 - E |f|^2 equals diag*(a^2 + b^2) + 2*off*a*b.
    """
    if E > 0:
        k = math.sqrt(E)
        s = math.sin(k * length)
        return k * math.cos(k * length) / s, -k / s
    if E < 0:
        kap = math.sqrt(-E)
        x = kap * length
        return kap / math.tanh(x), -kap / math.sinh(x)
    return 1.0 / length, -1.0 / length


def dtn_form_matrix(g: CompactMetricGraph, E: float) -> tuple[np.ndarray, np.ndarray]:
    """Form matrix of H - E on the non-Dirichlet vertex values.

    Returns (Q, free) where ``free`` lists the vertices kept.  Sum of
    derivatives pointing into the edges at vertex v equals -(Q_edges x)_v.
    """
    free = np.array([v for v in range(g.n_vertices) if g.conditions[v].kind != "dirichlet"], dtype=int)
    pos = {v: i for i, v in enumerate(free)}
    Q = np.zeros((len(free), len(free)))
    for u, v, length in g.edges:
        dg, off = _edge_dtn(E, length)
        iu, iv = pos.get(u), pos.get(v)
        if iu is not None:
            Q[iu, iu] += dg
        if iv is not None:
            Q[iv, iv] += dg
        if iu is not None and iv is not None:
            if iu == iv:
                Q[iu, iu] += 2 * off
            else:
                Q[iu, iv] += off
                Q[iv, iu] += off
    for v in free:
        c = g.conditions[v]
        if c.kind == "robin":
            Q[pos[v], pos[v]] += c.coefficient
    return Q, free


def _dirichlet_edge_count(g: CompactMetricGraph, E: float) -> int:
    if E <= 0:
        return 0
    k = math.sqrt(E)
    return int(sum(math.ceil(k * length / math.pi) - 1 for _, _, length in g.edges))


def count_below(g: CompactMetricGraph, E: float) -> int:
    """#{eigenvalues < E}; exact unless E is itself an eigenvalue.

    Energies where an edge is at a Dirichlet eigenvalue are nudged upward by
    a relative 1e-12.
    """
    E = float(E)
    if E > 0:
        k = math.sqrt(E)
        for _, _, length in g.edges:
            r = k * length / math.pi
            if abs(r - round(r)) < 1e-11 and round(r) > 0:
                k = k * (1 + 1e-12) + 1e-14
                E = k * k
    Q, _ = dtn_form_matrix(g, E)
    neg = int(np.sum(np.linalg.eigvalsh(Q) < 0)) if len(Q) else 0
    return _dirichlet_edge_count(g, E) + neg


def count_eigenvalues(g: CompactMetricGraph, E: float, eps: float = 1e-9) -> int:
    """#{eigenvalues <= E}, evaluated just above E."""
    return count_below(g, E + eps * max(1.0, abs(E)))


def _spectrum_dtn(g: CompactMetricGraph, k_max: float, opts: SolveOptions, k_min: float) -> Spectrum:
    step = opts.k_step or _default_step(g)
    lengths = np.array([e[2] for e in g.edges])

    def counter(ss):
        return np.array([count_below(g, s * abs(s)) for s in np.asarray(ss, dtype=float)], dtype=np.int64)

    lo = k_min
    if k_min <= 0.0:
        # signed variable s with E = s|s| reaches below the ground state
        lo = -1.0
        while counter(np.array([lo]))[0] > 0:
            lo *= 2.0
            if lo < -1e8:
                raise SolverError("could not bracket the ground state")
    sing = [math.pi * j / x for x in lengths for j in range(1, int(k_max * x / math.pi) + 1)]
    sing.append(0.0)
    roots = _roots_from_counter(counter, lo, k_max, step, opts.tol, singular=sing)
    roots = _merge(roots, opts.merge_tol)
    return _to_spectrum([(s * abs(s), m) for s, m in roots], k_max)


# ------------------------------------------------------------------ comb solver

def tooth_robin(k: float, ell: float, tol: float = 1e-12) -> float:
    """m(k) = k tan(k ell): sum of derivatives into a Neumann-tipped tooth per unit base value."""
    c = math.cos(k * ell)
    if abs(c) < tol:
        raise SolverError(f"Dirichlet tooth energy: k*ell = {k * ell} is a pole of m")
    if k == 0:
        return 0.0
    return k * math.tan(k * ell)


def _arccot(x: np.ndarray) -> np.ndarray:
    """Branch of arccot with values in (0, pi)."""
    return np.pi / 2 - np.arctan(x)


def _chain_count(
    ks: np.ndarray,
    teeth: np.ndarray,
    L: float,
    ell: float,
    boundary: str,
) -> np.ndarray:
    """Vectorised #{eigenvalues < k^2} for comb truncations, k > 0.

    Teeth are eliminated: each contributes its Dirichlet-base count
    floor(k ell / pi + 1/2) and leaves a point coupling -m(k) on the chain.
    The chain with frozen couplings is a Sturm-Liouville problem whose count
    is read off the Pruefer angle theta = atan2(u, u'/k) at the right end.
    """
    ks = np.asarray(ks, dtype=float)
    n_chain = len(teeth)
    if boundary not in ("kirchhoff", "dirichlet"):
        raise SolverError(f"unknown boundary {boundary!r}")
    with np.errstate(all="ignore"):
        m_over_k = np.tan(ks * ell)
    base = teeth.sum() * np.floor(ks * ell / np.pi + 0.5)
    if n_chain == 1:
        extra = (m_over_k > 0) if boundary == "kirchhoff" else np.zeros(len(ks), bool)
        return (base + extra).astype(np.int64)
    if boundary == "kirchhoff":
        # u'(0+) = -m u(0) at a toothed left end
        theta = _arccot(-m_over_k) if teeth[0] else np.full(len(ks), np.pi / 2)
        beta = _arccot(m_over_k) if teeth[-1] else np.full(len(ks), np.pi / 2)
    else:
        theta = np.zeros(len(ks))
        beta = np.full(len(ks), np.pi)
    step = ks * L
    for i in range(1, n_chain):
        theta = theta + step
        if i < n_chain - 1 and teeth[i]:
            # u' jumps by -m u: cot(theta) decreases by m/k within the same branch
            branch = np.floor(theta / np.pi)
            st = np.sin(theta)
            with np.errstate(all="ignore"):
                cot = np.cos(theta) / st
            new = branch * np.pi + _arccot(cot - m_over_k)
            theta = np.where(st == 0.0, theta, new)
    frozen = np.maximum(0.0, np.ceil((theta - beta) / np.pi))
    return (base + frozen).astype(np.int64)


def comb_singular_points(L: float, ell: float, k_max: float) -> list[float]:
    """k where a chain edge or a tooth sits at a Dirichlet energy."""
    pts = [math.pi * j / L for j in range(1, int(k_max * L / math.pi) + 2)]
    pts += [(math.pi / 2 + math.pi * j) / ell for j in range(int(k_max * ell / math.pi) + 2)]
    return sorted(set(round(p, 14) for p in pts if p <= k_max + 1))


def _check_comb(word: Word):
    if len(word) < 2 and word.letters[0] == 0:
        raise GraphError("degenerate truncation: a single vertex without edges")
    if any(a not in (0, 1) for a in word.letters):
        raise GraphError("comb words are binary")


def comb_count(k: float | np.ndarray, word: Word, L: float, ell: float, boundary: str = "kirchhoff"):
    """#{eigenvalues < k^2} of the comb truncation (exact for generic k > 0)."""
    _check_comb(word)
    teeth = np.asarray(word.letters, dtype=bool)
    out = _chain_count(np.atleast_1d(np.asarray(k, dtype=float)), teeth, L, ell, boundary)
    return int(out[0]) if np.ndim(k) == 0 else out


def comb_spectrum_fast(
    L: float,
    ell: float,
    word: Word,
    boundary: str = "kirchhoff",
    k_max: float = 2 * math.pi,
    opts: SolveOptions | None = None,
) -> Spectrum:
    """Spectrum of a comb truncation by eliminating the teeth.

    Each tooth becomes a point coupling on the chain and the count comes
    from a Pruefer angle shot along it.  Tooth-Dirichlet and chain Dirichlet
    energies are reported exactly, with multiplicity equal to the count jump
    across them.
    """
    opts = opts or SolveOptions()
    _check_comb(word)
    teeth = np.asarray(word.letters, dtype=bool)
    total = (len(word) - 1) * L + teeth.sum() * ell
    step = opts.k_step or math.pi / (8.0 * total)
    # the count is exact, so the grid only seeds the bisection
    step = max(step, 0.05 / max(L, ell)) if opts.k_step is None else step
    if step * max(L, ell) >= math.pi:
        raise GridTooCoarse(f"k_step={step} too coarse")
    k0 = 1e-4 * math.pi / total

    def counter(ks):
        return _chain_count(ks, teeth, L, ell, boundary)

    hi = _padded(k_max)
    sing = comb_singular_points(L, ell, hi)
    roots = _roots_from_counter(counter, k0, hi, step, opts.tol, singular=sing)
    roots = _inside(_merge(roots, opts.merge_tol), k_max)
    lams = [(k * k, m) for k, m in roots]
    if boundary == "kirchhoff":
        lams.insert(0, (0.0, 1))
    return _to_spectrum(lams, k_max)


def comb_shooting_mismatch(k: float, word: Word, L: float, ell: float, boundary: str = "kirchhoff") -> float:
    """Normalised mismatch of the right boundary condition after shooting left to right."""
    letters = word.letters
    m = tooth_robin(k, ell) if any(letters) else 0.0
    if boundary == "kirchhoff":
        f, fp = 1.0, 0.0
        if letters[0]:
            fp -= m * f
    else:
        f, fp = 0.0, k
    scale = max(abs(f), abs(fp) / k)
    c, s = math.cos(k * L), math.sin(k * L)
    for i in range(1, len(letters)):
        f, fp = c * f + s * fp / k, -k * s * f + c * fp
        scale = max(scale, abs(f), abs(fp) / k)
        if i < len(letters) - 1 and letters[i]:
            fp -= m * f
    if boundary == "kirchhoff":
        mis = fp - (m * f if letters[-1] else 0.0)
        return abs(mis) / (k * scale)
    return abs(f) / scale


def compact_eigenfunction_count(word: Word, L: float, ell: float, k: float, boundary: str = "kirchhoff", tol: float = 1e-9) -> int:
    """Number of independent eigenfunctions at a tooth-Dirichlet energy that
    vanish at every tooth base.

    Between consecutive teeth a separation of d chain edges admits one such
    function iff sin(k d L) = 0; the free stretch between a Kirchhoff end and
    the outermost tooth needs cos(k d L) = 0 (sin for a Dirichlet end).
    """
    if abs(math.cos(k * ell)) > tol:
        return 0
    pos = [i for i, a in enumerate(word.letters) if a == 1]
    if not pos:
        return 0
    count = 0
    for a, b in zip(pos[:-1], pos[1:]):
        if abs(math.sin(k * (b - a) * L)) < tol:
            count += 1
    last = len(word) - 1
    for d in (pos[0], last - pos[-1]):
        if boundary == "kirchhoff":
            if d > 0 and abs(math.cos(k * d * L)) < tol:
                count += 1
        else:
            if d == 0 or abs(math.sin(k * d * L)) < tol:
                count += 1
    return count


# ---------------------------------------------------------- decoration m-function

def decoration_graph(d: Decoration, base_condition=DIRICHLET) -> CompactMetricGraph:
    dd = d.subdivided()
    conds = [KIRCHHOFF] * dd.n_vertices
    conds[dd.base_vertex] = base_condition
    return CompactMetricGraph(dd.n_vertices, dd.edges, tuple(conds), (dd.base_vertex,))


def decoration_m_function(d: Decoration, E: float) -> float:
    """Sum of derivatives into the decoration edges at the base for the
    solution with f(base) = 1 and Kirchhoff conditions elsewhere."""
    if d.is_trivial:
        return 0.0
    g = decoration_graph(d, KIRCHHOFF)
    Q, free = dtn_form_matrix(g, E)
    b = g.boundary_vertices[0]
    others = [i for i in range(len(free)) if free[i] != b]
    bi = int(np.nonzero(free == b)[0][0])
    if not others:
        return float(-Q[bi, bi])
    Qii = Q[np.ix_(others, others)]
    Qib = Q[others, bi]
    try:
        x = -np.linalg.solve(Qii, Qib)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"E={E} is a Dirichlet energy of the decoration") from exc
    if np.linalg.cond(Qii) > 1e12:
        raise SolverError(f"E={E} is (numerically) a Dirichlet energy of the decoration")
    return float(-(Q[bi, bi] + Qib @ x))


def dirichlet_decoration_energies(d: Decoration, k_max: float, opts: SolveOptions | None = None) -> Spectrum:
    """Spectrum of the decoration with Dirichlet at the base, Kirchhoff elsewhere."""
    if d.is_trivial:
        return Spectrum(np.zeros(0), np.zeros(0, dtype=int), k_max)
    return metric_spectrum_general(decoration_graph(d, DIRICHLET), k_max, opts)


# --------------------------------------------------------------- half-line data

@dataclass(frozen=True)
class HalfLineData:
    """Logarithmic derivatives r = f'/f of the decaying solution at chain
    vertices 0..window, derivative along the chain direction.  ``left`` uses
    the left limit f'(x-), ``right`` the right limit f'(x+)."""

    energy: float
    left: np.ndarray
    right: np.ndarray
    far_n: int
    change_on_doubling: float


def _transfer(E: float, x: float) -> np.ndarray:
    if E > 0:
        k = math.sqrt(E)
        c, s = math.cos(k * x), math.sin(k * x)
        return np.array([[c, s / k], [-k * s, c]])
    if E < 0:
        kap = math.sqrt(-E)
        c, s = math.cosh(kap * x), math.sinh(kap * x)
        return np.array([[c, s / kap], [kap * s, c]])
    return np.array([[1.0, x], [0.0, 1.0]])


def _shoot_back(model: ModelSpec, letters: Sequence[int], E: float, window: int, far_n: int, tail: float):
    m = [decoration_m_function(model.decoration(a), E) for a in range(model.alphabet_size)]
    L = model.spacing_L
    # Dirichlet end at chain position far_n + tail (in units of L)
    v = np.array([0.0, 1.0])
    v = np.linalg.solve(_transfer(E, tail * L), v) if tail > 0 else v
    back = np.linalg.inv(_transfer(E, L))
    right = np.empty(window + 1)
    left = np.empty(window + 1)
    for j in range(far_n, -1, -1):
        # v holds (f, f'(x_j+)) when entering vertex j from the right
        f, fp_r = v
        a = letters[j]
        fp_l = fp_r + m[a] * f
        if j <= window:
            right[j] = fp_r / f
            left[j] = fp_l / f
        v = np.array([f, fp_l])
        v = v / np.linalg.norm(v)
        if j > 0:
            v = back @ v
            v = v / np.linalg.norm(v)
    return left, right


MIN_FAR = 200


def half_line_solution_data(
    model: ModelSpec,
    word: Word,
    E: float,
    window: int,
    far_n: int | None = None,
    stability_tol: float = 1e-6,
) -> HalfLineData:
    """Robin data of the solution decaying to the right, on chain vertices 0..window.

    The half-line is replaced by [0, far_n * L] with Dirichlet at the far
    end; the result is accepted only if moving the far end to roughly twice
    as far (off the lattice) changes every ratio by less than ``stability_tol``.
    ``word`` must supply at least 2*far_n + 2 letters starting at vertex 0.
    """
    far_n = max(4 * window, MIN_FAR) if far_n is None else far_n
    if far_n < 4 * window:
        raise SolverError("far_n must be at least 4 times the window")
    if len(word) < 2 * far_n + 2:
        raise SolverError(f"word too short: need {2 * far_n + 2} letters")
    letters = word.letters
    l1, r1 = _shoot_back(model, letters, E, window, far_n, 0.0)
    l2, r2 = _shoot_back(model, letters, E, window, 2 * far_n, 0.381966)
    with np.errstate(all="ignore"):
        scale = 1.0 + np.abs(np.concatenate([r1, l1]))
        change = float(np.max(np.abs(np.concatenate([r1 - r2, l1 - l2])) / scale))
    if not np.isfinite(change) or change > stability_tol:
        raise SolverError(f"E={E} in spectrum or too close to it: half-line data unstable ({change:.2e})")
    return HalfLineData(E, l1, r1, far_n, change)


# --------------------------------------------------------------- FD oracle

def fd_oracle(g: CompactMetricGraph, h: float, count: int) -> np.ndarray:
    """Lowest ``count`` eigenvalues from linear finite elements with lumped mass.

    Each edge is cut into ceil(length/h) equal cells; the lumped mass makes
    this the three-point difference scheme with flux matching at vertices.
    Test oracle only (O(h^2) accurate).
    """
    shortest = min(e[2] for e in g.edges)
    if h > shortest / 8:
        raise SolverError(f"h={h} exceeds shortest edge / 8 = {shortest / 8}")
    rows, cols, vals = [], [], []
    n_nodes = g.n_vertices
    mass = np.zeros(n_nodes).tolist()

    def add(i, j, w):
        rows.append(i)
        cols.append(j)
        vals.append(w)

    for u, v, length in g.edges:
        ncell = int(math.ceil(length / h))
        he = length / ncell
        nodes = [u] + list(range(n_nodes, n_nodes + ncell - 1)) + [v]
        n_nodes += ncell - 1
        mass += [0.0] * (ncell - 1)
        for a, b in zip(nodes[:-1], nodes[1:]):
            w = 1.0 / he
            add(a, a, w)
            add(b, b, w)
            add(a, b, -w)
            add(b, a, -w)
            mass[a] += he / 2
            mass[b] += he / 2
    for v, c in enumerate(g.conditions):
        if c.kind == "robin":
            add(v, v, c.coefficient)
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))
    keep = np.array([i for i in range(n_nodes) if i >= g.n_vertices or g.conditions[i].kind != "dirichlet"])
    K = K[keep][:, keep]
    minv = sp.diags(1.0 / np.sqrt(np.asarray(mass)[keep]))
    A = (minv @ K @ minv).tocsc()
    count = min(count, A.shape[0] - 2)
    shift = -1.0 - sum(abs(c.coefficient) for c in g.conditions) ** 2
    vals_ = eigsh(A, k=count, sigma=shift, which="LM", return_eigenvectors=False)
    return np.sort(vals_)


def comb_truncation(L: float, ell: float, word: Word, boundary: str = "kirchhoff") -> CompactMetricGraph:
    from .graphs import comb_model

    return build_metric_truncation(comb_model(L, ell), word, boundary)


def solve_truncation(
    model: ModelSpec,
    word: Word,
    boundary: str = "kirchhoff",
    k_max: float = 2 * math.pi,
    opts: SolveOptions | None = None,
) -> tuple[Spectrum, float]:
    """Spectrum and total length of a truncation; combs take the fast route."""
    if model.is_comb():
        teeth = sum(word.letters)
        total = (len(word) - 1) * model.spacing_L + teeth * model.tooth_length
        return comb_spectrum_fast(model.spacing_L, model.tooth_length, word, boundary, k_max, opts), total
    if all(model.decoration(a).is_trivial for a in set(word.letters)):
        # bare chain: the tooth-free fast counter applies
        bare = Word(tuple(0 for _ in word.letters), word.origin_index, 2)
        return comb_spectrum_fast(model.spacing_L, 1.0, bare, boundary, k_max, opts), (len(word) - 1) * model.spacing_L
    g = build_metric_truncation(model, word, boundary)
    return metric_spectrum_general(g, k_max, opts), g.total_length
