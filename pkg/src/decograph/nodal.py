"""Zero counts, nodal surplus, the winding angle along the half-line and the
spectral/nodal counting identities."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graphs import (
    KIRCHHOFF,
    CompactMetricGraph,
    Decoration,
    ModelSpec,
    robin,
)
from .metric_solver import (
    MIN_FAR,
    HalfLineData,
    SolverError,
    count_below,
    decoration_graph,
    decoration_m_function,
    dtn_form_matrix,
    half_line_solution_data,
)
from .words import SturmianParameters, Word, generate_word, letter_frequencies

NUDGE = 1e-9


# ------------------------------------------------------------------ zero counting

def zeros_on_interval(f0: float, fp0: float, k: float, length: float) -> int:
    """Zeros of f0 cos(kx) + (fp0/k) sin(kx) in (0, length], exactly.

    Writing the solution as R sin(kx + psi) with psi = atan2(f0, fp0/k), the
    zeros are the x with kx + psi in pi*Z.
    """
    if not k > 0:
        raise ValueError("k must be positive; use zeros_on_edge for E <= 0")
    if f0 == 0 and fp0 == 0:
        raise ValueError("the zero solution has no isolated zeros")
    psi = math.atan2(f0, fp0 / k)
    return int(math.floor((psi + k * length) / math.pi) - math.floor(psi / math.pi))


def zeros_on_edge(f0: float, fp0: float, E: float, length: float) -> int:
    """Zeros in (0, length] of the solution of -f'' = E f with f(0)=f0, f'(0)=fp0."""
    if E > 0:
        return zeros_on_interval(f0, fp0, math.sqrt(E), length)
    if f0 == 0 and fp0 == 0:
        raise ValueError("the zero solution has no isolated zeros")
    if f0 == 0:
        return 0
    if E == 0:
        # f0 + fp0 x
        x = -f0 / fp0 if fp0 != 0 else math.inf
        return int(0 < x <= length)
    kap = math.sqrt(-E)
    # f0 cosh + (fp0/kap) sinh vanishes where tanh(kap x) = -f0 kap / fp0
    if fp0 == 0:
        return 0
    target = -f0 * kap / fp0
    return int(0 < target <= math.tanh(kap * length))


def _edge_solution(E: float, a: float, b: float, length: float, s):
    """(f, f') at positions s on an edge with end values a (s=0) and b (s=length)."""
    s = np.asarray(s, dtype=float)
    if E > 0:
        k = math.sqrt(E)
        den = math.sin(k * length)
        f = (a * np.sin(k * (length - s)) + b * np.sin(k * s)) / den
        fp = k * (-a * np.cos(k * (length - s)) + b * np.cos(k * s)) / den
    elif E < 0:
        kap = math.sqrt(-E)
        den = math.sinh(kap * length)
        f = (a * np.sinh(kap * (length - s)) + b * np.sinh(kap * s)) / den
        fp = kap * (-a * np.cosh(kap * (length - s)) + b * np.cosh(kap * s)) / den
    else:
        f = a + (b - a) * s / length
        fp = np.full_like(s, (b - a) / length)
    return f, fp


# ------------------------------------------------------------- decoration nodal

@dataclass(frozen=True)
class DecorationSolution:
    """The solution on a decoration with f(base) = 1, Kirchhoff elsewhere."""

    graph: CompactMetricGraph
    energy: float
    values: np.ndarray
    m: float


def decoration_solution(d: Decoration, E: float) -> DecorationSolution:
    g = decoration_graph(d, KIRCHHOFF)
    b = g.boundary_vertices[0]
    Q, free = dtn_form_matrix(g, E)
    others = [v for v in range(g.n_vertices) if v != b]
    x = np.ones(g.n_vertices)
    if others:
        x[others] = -np.linalg.solve(Q[np.ix_(others, others)], Q[others, b])
    m = decoration_m_function(d, E)
    return DecorationSolution(g, E, x, m)


@dataclass(frozen=True)
class NodalData:
    energy: float
    zero_count: int
    surplus: int
    letter: int | None = None
    spectral_count: int = 1
    perturbation: float = 0.0

    def __post_init__(self):
        if self.zero_count < 0:
            raise ValueError("zero count must be non-negative")
        if self.surplus != self.zero_count - (self.spectral_count - 1):
            raise ValueError("surplus inconsistent with zero and spectral counts")


def _decoration_zero_count(sol: DecorationSolution) -> int:
    E = sol.energy
    x = sol.values
    total = 0
    for u, v, length in sol.graph.edges:
        f, fp = _edge_solution(E, x[u], x[v], length, np.array([0.0]))
        z = zeros_on_edge(float(f[0]), float(fp[0]), E, length)
        total += z
    return total


def _robin_count(g: CompactMetricGraph, E: float, eps: float = NUDGE) -> int:
    """#{eigenvalues <= E} of an operator built so that E is an eigenvalue."""
    return count_below(g, E + eps * max(1.0, abs(E)))


def decoration_nodal(d: Decoration, E: float, max_nudges: int = 5) -> NodalData:
    """Zero count, Robin spectral count and surplus of a decoration at E."""
    if d.is_trivial:
        return NodalData(E, 0, 0, d.letter, 1, 0.0)
    E0 = E
    for attempt in range(max_nudges + 1):
        try:
            sol = decoration_solution(d, E)
            vals = np.abs(sol.values)
            if np.min(vals) < 1e-12 * np.max(vals) or not np.isfinite(sol.m):
                raise SolverError("solution vanishes at a vertex")
            break
        except (SolverError, np.linalg.LinAlgError):
            if attempt == max_nudges:
                raise SolverError(f"E={E0} is an excluded energy of the decoration")
            E = E + NUDGE * max(1.0, abs(E))
    z = _decoration_zero_count(sol)
    g = sol.graph.with_conditions({sol.graph.boundary_vertices[0]: robin(sol.m)})
    n = _robin_count(g, E)
    return NodalData(E, z, z - (n - 1), d.letter, n, E - E0)


# ----------------------------------------------------------- half-line geometry

def _half_line(model: ModelSpec, word: Word, E: float, window: int, far_n: int | None) -> HalfLineData:
    """Half-line data; without an explicit far end, double it (as far as the
    word allows) until the stability check passes."""
    if far_n is not None:
        return half_line_solution_data(model, word, E, window, far_n)
    far = max(4 * window, MIN_FAR)
    while True:
        try:
            return half_line_solution_data(model, word, E, window, far)
        except SolverError:
            if 2 * (2 * far) + 2 > len(word):
                raise
            far *= 2


def _sphere_speed(model: ModelSpec) -> list[float]:
    """Metric factor per letter: decorations at least L long are shrunk to L/2."""
    L = model.spacing_L
    out = []
    for d in model.decorations:
        tot = d.total_length
        out.append(L / (2 * tot) if tot >= L and tot > 0 else 1.0)
    return out


def _distances(g: CompactMetricGraph, src: int) -> np.ndarray:
    dist = np.full(g.n_vertices, np.inf)
    dist[src] = 0.0
    adj: dict[int, list] = {}
    for u, v, length in g.edges:
        adj.setdefault(u, []).append((v, length))
        adj.setdefault(v, []).append((u, length))
    heap = [(0.0, src)]
    while heap:
        d0, x = heapq.heappop(heap)
        if d0 > dist[x]:
            continue
        for y, length in adj.get(x, []):
            if d0 + length < dist[y]:
                dist[y] = d0 + length
                heapq.heappush(heap, (dist[y], y))
    return dist


@dataclass
class _DecorationFronts:
    sol: DecorationSolution
    dist: np.ndarray
    speed: float

    def riccati_sum(self, D: np.ndarray) -> np.ndarray:
        """Sum of f'/f over decoration points at true distance D (> 0) from the
        base, derivatives pointing away from the base."""
        E = self.sol.energy
        x = self.sol.values
        total = np.zeros_like(D)
        for u, v, length in self.sol.graph.edges:
            du, dv = self.dist[u], self.dist[v]
            split = min(max((dv + length - du) / 2, 0.0), length)
            su = D - du
            mask_u = (su > 0) & (su < split)
            if mask_u.any():
                f, fp = _edge_solution(E, x[u], x[v], length, su[mask_u])
                total[mask_u] += fp / f
            sv = D - dv
            mask_v = (sv > 0) & (sv < length - split)
            if mask_v.any():
                f, fp = _edge_solution(E, x[u], x[v], length, length - sv[mask_v])
                total[mask_v] -= fp / f
        return total

    def zeros_between(self, D0: float, D1: float) -> int:
        """Zeros of the solution at sphere points with true distance in (D0, D1]."""
        E = self.sol.energy
        x = self.sol.values
        count = 0
        for u, v, length in self.sol.graph.edges:
            du, dv = self.dist[u], self.dist[v]
            split = min(max((dv + length - du) / 2, 0.0), length)
            for lo, hi, rev in ((D0 - du, D1 - du, False), (D0 - dv, D1 - dv, True)):
                top = length - split if rev else split
                lo, hi = max(lo, 0.0), min(hi, top)
                if hi <= lo:
                    continue
                s0 = length - hi if rev else lo
                f, fp = _edge_solution(E, x[u], x[v], length, np.array([s0]))
                count += zeros_on_edge(float(f[0]), float(fp[0]), E, hi - lo)
        return count


def _chain_riccati(E: float, r0: float, s: np.ndarray) -> np.ndarray:
    """f'/f at distance s along a chain edge starting from f=1, f'=r0."""
    f, fp = _edge_solution_ivp(E, 1.0, r0, s)
    return fp / f


def _edge_solution_ivp(E: float, f0: float, fp0: float, s):
    s = np.asarray(s, dtype=float)
    if E > 0:
        k = math.sqrt(E)
        return f0 * np.cos(k * s) + fp0 / k * np.sin(k * s), -k * f0 * np.sin(k * s) + fp0 * np.cos(k * s)
    if E < 0:
        kap = math.sqrt(-E)
        return f0 * np.cosh(kap * s) + fp0 / kap * np.sinh(kap * s), kap * f0 * np.sinh(kap * s) + fp0 * np.cosh(kap * s)
    return f0 + fp0 * s, np.full_like(s, fp0)


def _cayley_turns(r: np.ndarray) -> np.ndarray:
    """Arg[(r + i)/(r - i)] / 2pi in [0, 1); increases as r decreases."""
    return np.mod(np.angle((r + 1j) / (r - 1j)) / (2 * np.pi), 1.0)


@dataclass(frozen=True)
class PruferTrace:
    times: np.ndarray
    lifted: np.ndarray
    zero_counts: np.ndarray  # direct zero counts at integer times 0..t_max

    def floor_at_integers(self) -> np.ndarray:
        idx = [int(np.nonzero(np.isclose(self.times, j))[0][-1]) for j in range(len(self.zero_counts))]
        return np.floor(self.lifted[idx]).astype(int)

    def to_csv(self) -> str:
        lines = ["t,phi_lifted,zero_count"]
        zc = np.floor(self.lifted).astype(int)
        lines += [f"{t:.12g},{p:.12g},{z}" for t, p, z in zip(self.times, self.lifted, zc)]
        return "\n".join(lines) + "\n"


def _fronts(model: ModelSpec, E: float) -> list[_DecorationFronts | None]:
    speeds = _sphere_speed(model)
    out: list[_DecorationFronts | None] = []
    for a, d in enumerate(model.decorations):
        if d.is_trivial:
            out.append(None)
            continue
        sol = decoration_solution(d, E)
        g = sol.graph
        out.append(_DecorationFronts(sol, _distances(g, g.boundary_vertices[0]), speeds[a]))
    return out


def direct_zero_counts(model: ModelSpec, word: Word, E: float, data: HalfLineData, t_max: int) -> np.ndarray:
    """Z_t = zeros of the decaying solution in the part of the graph within
    distance tL of the origin, for t = 0..t_max (chain edges plus whole
    decorations at vertices 0..t-1)."""
    L = model.spacing_L
    z_dec = [0 if d.is_trivial else _decoration_zero_count(decoration_solution(d, E)) for d in model.decorations]
    out = np.zeros(t_max + 1, dtype=int)
    for j in range(t_max):
        z = zeros_on_edge(1.0, float(data.right[j]), E, L) + z_dec[word.letters[j]]
        out[j + 1] = out[j] + z
    return out


def prufer_trace(
    model: ModelSpec,
    word: Word,
    E: float,
    t_max: int,
    data: HalfLineData | None = None,
    samples_per_unit: int = 16,
    min_step: float = 1e-6,
) -> PruferTrace:
    """Lifted winding angle of the Cayley-transformed sum of f'/f over spheres."""
    if data is None:
        data = _half_line(model, word, E, t_max, None)
    if len(data.right) < t_max + 1:
        raise SolverError("half-line data shorter than t_max")
    L = model.spacing_L
    fronts = _fronts(model, E)

    def phi_at(j: int, tau: np.ndarray) -> np.ndarray:
        """phi at times j + tau, tau in (0, 1]; tau == 1 uses the left limit at vertex j+1."""
        r = np.empty_like(tau)
        interior = tau < 1.0
        r[interior] = _chain_riccati(E, float(data.right[j]), tau[interior] * L)
        r[~interior] = data.left[j + 1]
        fr = fronts[word.letters[j]]
        if fr is not None:
            D = tau * L / fr.speed
            r = r + np.where(interior, fr.riccati_sum(D), 0.0)
        return _cayley_turns(r)

    def poles(j: int, a: float, b: float) -> int:
        """Exact number of sphere zeros for times in (j + a, j + b]."""
        f, fp = _edge_solution_ivp(E, 1.0, float(data.right[j]), np.array([a * L]))
        n = zeros_on_edge(float(f[0]), float(fp[0]), E, (b - a) * L)
        fr = fronts[word.letters[j]]
        if fr is not None:
            n += fr.zeros_between(a * L / fr.speed, b * L / fr.speed)
        return n

    times = [0.0]
    vals = [float(_cayley_turns(np.array([data.left[0]]))[0])]
    lifted = [vals[0]]
    for j in range(t_max):
        taus = np.linspace(0.0, 1.0, samples_per_unit + 1)[1:]
        ph = phi_at(j, taus)
        prev_tau, prev_val = 0.0, vals[-1]
        queue = list(zip(taus, ph))
        while queue:
            tau, val = queue.pop(0)
            # phi crosses an integer (upwards) exactly when a zero enters the
            # sphere, so the exact zero count fixes the lift; the angle must
            # then move by less than half a turn, else the sampling is refined
            lift = math.floor(lifted[-1]) + poles(j, prev_tau, tau) + val
            if abs(lift - lifted[-1]) >= 0.5:
                if tau - prev_tau < min_step:
                    raise SolverError(
                        f"cannot lift phi near t={j + tau}: coincident zeros on the sphere"
                    )
                mid = 0.5 * (prev_tau + tau)
                queue.insert(0, (tau, val))
                queue.insert(0, (mid, float(phi_at(j, np.array([mid]))[0])))
                continue
            times.append(j + tau)
            vals.append(val)
            lifted.append(lift)
            prev_tau, prev_val = tau, val
    zc = direct_zero_counts(model, word, E, data, t_max)
    return PruferTrace(np.array(times), np.array(lifted), zc)


# --------------------------------------------------------- counting identities

@dataclass(frozen=True)
class CountingReport:
    lhs: int
    rhs: int
    n_horizontal: int
    decoration_counts: dict
    letter_counts: dict
    zeros_horizontal: int

    @property
    def equal(self) -> bool:
        return self.lhs == self.rhs

    @property
    def sturm_holds(self) -> bool:
        return self.n_horizontal == self.zeros_horizontal + 1

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "equal": self.equal,
            "n_horizontal": self.n_horizontal,
            "zeros_horizontal": self.zeros_horizontal,
            "sturm_holds": self.sturm_holds,
        }


def truncated_graph(model: ModelSpec, word: Word, t: int, gamma0: float, gamma_t: float) -> CompactMetricGraph:
    """Chain vertices 0..t, decorations at 0..t-1, Robin data at both ends."""
    if t < 1:
        raise ValueError("t must be at least 1")
    L = model.spacing_L
    edges = [(i, i + 1, L) for i in range(t)]
    nxt = t + 1
    for i in range(t):
        d = model.decoration(word.letters[i]).subdivided()
        local = {}
        for v in range(d.n_vertices):
            if v == d.base_vertex:
                local[v] = i
            else:
                local[v] = nxt
                nxt += 1
        edges += [(local[u], local[v], x) for u, v, x in d.edges]
    conds = [KIRCHHOFF] * nxt
    conds[0] = robin(gamma0)
    conds[t] = robin(gamma_t)
    return CompactMetricGraph(nxt, tuple(edges), tuple(conds), (0, t), tuple(range(t + 1)))


def horizontal_graph(L: float, couplings: Sequence[float], gamma0: float, gamma_t: float) -> CompactMetricGraph:
    """Path [0, tL] with Robin couplings at interior vertices 1..t-1."""
    t = len(couplings) + 1
    conds = [robin(gamma0)] + [robin(c) for c in couplings] + [robin(gamma_t)]
    return CompactMetricGraph(t + 1, tuple((i, i + 1, L) for i in range(t)), tuple(conds), (0, t), tuple(range(t + 1)))


def verify_counting_lemma(
    model: ModelSpec,
    word: Word,
    t: int,
    E: float,
    data: HalfLineData | None = None,
    far_n: int | None = None,
) -> CountingReport:
    """Compare the spectral count on the truncated decorated graph with the
    horizontal count plus decoration counts, at a gap energy E."""
    if data is None:
        data = _half_line(model, word, E, max(t, 1), far_n)
    L = model.spacing_L
    letters = word.letters
    m = {a: decoration_m_function(model.decoration(a), E) for a in set(letters[:t])}
    gamma0 = float(data.left[0])
    gamma_t = -float(data.left[t])
    g = truncated_graph(model, word, t, gamma0, gamma_t)
    lhs = _robin_count(g, E)
    h = horizontal_graph(L, [-m[letters[j]] for j in range(1, t)], float(data.right[0]), gamma_t)
    n_h = _robin_count(h, E)
    counts: dict[int, int] = {}
    for j in range(t):
        counts[letters[j]] = counts.get(letters[j], 0) + 1
    n_dec = {a: decoration_nodal(model.decoration(a), E).spectral_count for a in counts}
    rhs = n_h + sum(counts[a] * (n_dec[a] - 1) for a in counts)
    z_h = sum(zeros_on_edge(1.0, float(data.right[j]), E, L) for j in range(t))
    return CountingReport(int(lhs), int(rhs), int(n_h), n_dec, counts, int(z_h))


@dataclass(frozen=True)
class SturmReport:
    count: int
    zeros: int

    @property
    def holds(self) -> bool:
        return self.count == self.zeros + 1


def sturm_check(L: float, couplings: Sequence[float], gamma0: float, E: float) -> SturmReport:
    """Shoot from the left Robin end through interior couplings, close the
    right end with the Robin value that makes the solution an eigenfunction,
    and compare the spectral count at E with the zero count."""
    f, fp = 1.0, gamma0  # sum of into-edge derivatives at 0 is f'(0+)
    zeros = 0
    for j in range(len(couplings) + 1):
        zeros += zeros_on_edge(f, fp, E, L)
        ff, ffp = _edge_solution_ivp(E, f, fp, np.array([L]))
        f, fp = float(ff[0]), float(ffp[0])
        if j < len(couplings):
            fp = fp + couplings[j] * f
        scale = math.hypot(f, fp)
        f, fp = f / scale, fp / scale
    gamma_t = -fp / f
    g = horizontal_graph(L, couplings, gamma0, gamma_t)
    return SturmReport(_robin_count(g, E), zeros)


# ------------------------------------------------------------ Schwartzman check

@dataclass(frozen=True)
class SchwartzmanReport:
    energy: float
    zero_rate: float
    predicted: float
    residual: float
    lattice_point: tuple[int, int]
    lattice_distance: float
    ids_value: float

    def to_dict(self) -> dict:
        return {
            "E": self.energy,
            "zero_rate": self.zero_rate,
            "N_Lbar_plus_surplus": self.predicted,
            "residual": self.residual,
            "lattice_point": {"n": self.lattice_point[0], "m": self.lattice_point[1]},
            "lattice_distance": self.lattice_distance,
            "ids_value": self.ids_value,
        }


def nearest_rotation_lattice_point(alpha: float, x: float, box: int = 10) -> tuple[tuple[int, int], float]:
    best = None
    for n in range(-box, box + 1):
        m = round(x - alpha * n)
        d = abs(alpha * n + m - x)
        key = (d, abs(n), abs(m))
        if best is None or key < best[0]:
            best = (key, (n, int(m)))
    return best[1], best[0][0]


def schwartzman_identity_check(
    model: ModelSpec,
    params: SturmianParameters,
    E: float,
    t_max: int = 500,
    ids_value: float | None = None,
    ids_size: int = 400,
    lattice_box: int = 10,
) -> SchwartzmanReport:
    """Zero rate of the decaying solution versus N(E) * Lbar + sum nu_a sigma_a(E)."""
    from .graphs import normalized_length
    from .metric_solver import solve_truncation

    far_n = 4 * t_max
    word = generate_word(params, 0, 2 * far_n + 2)
    data = _half_line(model, word, E, t_max, far_n)
    z = direct_zero_counts(model, word, E, data, t_max)
    rate = z[-1] / t_max
    freqs = letter_frequencies(params)
    Lbar = normalized_length(model, freqs)
    if ids_value is None:
        if E < 0:
            ids_value = 0.0
        else:
            w = generate_word(params, 0, ids_size)
            vals = []
            for b in ("kirchhoff", "dirichlet"):
                spec, total = solve_truncation(model, w, b, math.sqrt(E) + 0.1)
                vals.append(spec.count(E) / total)
            ids_value = float(np.mean(vals))
    surplus = sum(freqs[a] * decoration_nodal(model.decoration(a), E).surplus for a in range(model.alphabet_size))
    predicted = ids_value * Lbar + surplus
    point, dist = nearest_rotation_lattice_point(params.alpha, rate, lattice_box)
    return SchwartzmanReport(E, float(rate), float(predicted), float(abs(rate - predicted)), point, float(dist), float(ids_value))
