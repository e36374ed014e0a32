"""Decorations, decorated Z-graph truncations and averaged geometric quantities."""
from __future__ import annotations

import configparser
import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .words import SturmianParameters, Word, parse_alpha


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Decoration:
    """A compact graph glued to the chain at ``base_vertex``.

    Vertices are numbered 0..n_vertices-1.  A decoration with one vertex and no
    edges is the empty decoration.
    """

    n_vertices: int
    edges: tuple[tuple[int, int, float], ...]
    base_vertex: int = 0
    letter: int = 0

    def __post_init__(self):
        if self.n_vertices < 1:
            raise GraphError("a decoration needs at least one vertex")
        if not 0 <= self.base_vertex < self.n_vertices:
            raise GraphError("base vertex not in decoration")
        for u, v, length in self.edges:
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise GraphError(f"edge ({u}, {v}) references a missing vertex")
            if not length > 0:
                raise GraphError("edge lengths must be positive")
        if not _connected(self.n_vertices, [(u, v) for u, v, _ in self.edges]):
            raise GraphError("decoration must be connected")

    @property
    def vertices(self) -> list[int]:
        return list(range(self.n_vertices))

    @property
    def total_length(self) -> float:
        return float(sum(e[2] for e in self.edges))

    @property
    def is_trivial(self) -> bool:
        return not self.edges

    @property
    def is_simple(self) -> bool:
        seen = set()
        for u, v, _ in self.edges:
            key = (min(u, v), max(u, v))
            if u == v or key in seen:
                return False
            seen.add(key)
        return True

    def subdivided(self) -> "Decoration":
        """Metric-equivalent simple graph: loops become triangles and repeated
        edges get a midpoint.  Degree-2 Kirchhoff vertices are transparent."""
        if self.is_simple:
            return self
        n = self.n_vertices
        edges = []
        seen = set()
        for u, v, length in self.edges:
            key = (min(u, v), max(u, v))
            if u == v:
                a, b = n, n + 1
                n += 2
                edges += [(u, a, length / 3), (a, b, length / 3), (b, u, length / 3)]
            elif key in seen:
                m = n
                n += 1
                edges += [(u, m, length / 2), (m, v, length / 2)]
            else:
                edges.append((u, v, length))
            seen.add(key)
        return Decoration(n, tuple(edges), self.base_vertex, self.letter)

    def to_dict(self) -> dict:
        return {
            "letter": self.letter,
            "n_vertices": self.n_vertices,
            "base_vertex": self.base_vertex,
            "edges": [[u, v, length] for u, v, length in self.edges],
        }


def single_vertex(letter: int = 0) -> Decoration:
    return Decoration(1, (), 0, letter)


def tooth(ell: float, letter: int = 1) -> Decoration:
    return Decoration(2, ((0, 1, float(ell)),), 0, letter)


def star(lengths, letter: int = 1) -> Decoration:
    edges = tuple((0, i + 1, float(x)) for i, x in enumerate(lengths))
    return Decoration(len(edges) + 1, edges, 0, letter)


def loop(length: float, letter: int = 1) -> Decoration:
    return Decoration(1, ((0, 0, float(length)),), 0, letter)


def triangle(length: float = 1.0, letter: int = 1) -> Decoration:
    return Decoration(3, ((0, 1, length), (1, 2, length), (2, 0, length)), 0, letter)


@dataclass(frozen=True)
class ModelSpec:
    decorations: tuple[Decoration, ...]
    spacing_L: float
    alpha_source: SturmianParameters | None = None

    def __post_init__(self):
        if not self.spacing_L > 0:
            raise GraphError("spacing L must be positive")
        for i, d in enumerate(self.decorations):
            if d.letter != i:
                raise GraphError("decorations must be listed in letter order")

    @property
    def alphabet_size(self) -> int:
        return len(self.decorations)

    def decoration(self, a: int) -> Decoration:
        return self.decorations[a]

    def is_comb(self) -> bool:
        """Letter 0 bare, letter 1 a single pendant edge."""
        if self.alphabet_size != 2 or not self.decorations[0].is_trivial:
            return False
        d = self.decorations[1]
        return d.n_vertices == 2 and len(d.edges) == 1 and d.edges[0][0] != d.edges[0][1]

    @property
    def tooth_length(self) -> float:
        if not self.is_comb():
            raise GraphError("not a comb model")
        return self.decorations[1].edges[0][2]

    def to_dict(self) -> dict:
        src = self.alpha_source
        return {
            "L": self.spacing_L,
            "alpha": None if src is None else src.alpha,
            "theta": None if src is None else src.theta,
            "decorations": [d.to_dict() for d in self.decorations],
        }


def comb_model(L: float = 1.0, ell: float = 1.0, params: SturmianParameters | None = None) -> ModelSpec:
    return ModelSpec((single_vertex(0), tooth(ell, 1)), float(L), params)


def bare_chain_model(L: float = 1.0, params: SturmianParameters | None = None) -> ModelSpec:
    return ModelSpec((single_vertex(0), single_vertex(1)), float(L), params)


@dataclass(frozen=True)
class VertexCondition:
    kind: str = "kirchhoff"
    coefficient: float = 0.0

    def __post_init__(self):
        if self.kind not in ("kirchhoff", "robin", "dirichlet"):
            raise GraphError(f"unknown vertex condition {self.kind!r}")
        if not np.isfinite(self.coefficient):
            raise GraphError("Robin coefficient must be finite")


KIRCHHOFF = VertexCondition("kirchhoff")
DIRICHLET = VertexCondition("dirichlet")


def robin(coefficient: float) -> VertexCondition:
    """Sum of derivatives pointing into the incident edges = coefficient * f(v)."""
    return VertexCondition("robin", float(coefficient))


@dataclass(frozen=True)
class CompactMetricGraph:
    n_vertices: int
    edges: tuple[tuple[int, int, float], ...]
    conditions: tuple[VertexCondition, ...]
    boundary_vertices: tuple[int, ...] = ()
    chain: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.conditions) != self.n_vertices:
            raise GraphError("one vertex condition per vertex is required")
        for u, v, length in self.edges:
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise GraphError("edge references a missing vertex")
            if not length > 0:
                raise GraphError("edge lengths must be positive")
        if not _connected(self.n_vertices, [(u, v) for u, v, _ in self.edges]):
            raise GraphError("graph must be connected")

    @property
    def total_length(self) -> float:
        return float(sum(e[2] for e in self.edges))

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=int)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def with_conditions(self, updates: Mapping[int, VertexCondition]) -> "CompactMetricGraph":
        conds = list(self.conditions)
        for v, c in updates.items():
            conds[v] = c
        return CompactMetricGraph(self.n_vertices, self.edges, tuple(conds), self.boundary_vertices, self.chain)

    def is_equilateral(self, length: float = 1.0, tol: float = 1e-12) -> bool:
        return all(abs(e[2] - length) <= tol for e in self.edges)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_vertices": self.n_vertices,
                "edges": [[u, v, length] for u, v, length in self.edges],
                "conditions": [[c.kind, c.coefficient] for c in self.conditions],
                "boundary_vertices": list(self.boundary_vertices),
                "chain": list(self.chain),
            }
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["u", "v", "length"])
        for u, v, length in self.edges:
            writer.writerow([u, v, f"{length:.12g}"])
        return buf.getvalue()


def metric_graph(n_vertices: int, edges, conditions=None) -> CompactMetricGraph:
    """Convenience constructor, Kirchhoff everywhere unless told otherwise."""
    conds = [KIRCHHOFF] * n_vertices
    for v, c in (conditions or {}).items():
        conds[v] = c
    return CompactMetricGraph(n_vertices, tuple((int(u), int(v), float(x)) for u, v, x in edges), tuple(conds))


def _connected(n: int, pairs) -> bool:
    if n == 0:
        return False
    adj = defaultdict(list)
    for u, v in pairs:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == n


def _glue(model: ModelSpec, word: Word, subdivide: bool):
    """Chain vertices 0..len-1 first, then decoration vertices in word order."""
    if len(word) == 0:
        raise GraphError("empty word")
    if max(word.letters) >= model.alphabet_size:
        raise GraphError("word uses a letter without decoration")
    n_chain = len(word)
    edges = [(i, i + 1, model.spacing_L) for i in range(n_chain - 1)]
    nxt = n_chain
    for i, a in enumerate(word.letters):
        dec = model.decoration(a)
        if subdivide:
            dec = dec.subdivided()
        local = {}
        for v in range(dec.n_vertices):
            if v == dec.base_vertex:
                local[v] = i
            else:
                local[v] = nxt
                nxt += 1
        edges += [(local[u], local[v], x) for u, v, x in dec.edges]
    return nxt, edges, n_chain


def build_metric_truncation(model: ModelSpec, word: Word, boundary: str = "kirchhoff") -> CompactMetricGraph:
    """Chain of len(word) vertices spaced by L with decoration word[i] at vertex i.

    ``boundary`` sets the condition at the two chain ends ("kirchhoff" or
    "dirichlet").
    """
    n, edges, n_chain = _glue(model, word, subdivide=True)
    if not edges:
        raise GraphError("degenerate truncation: a single vertex without edges")
    conds = [KIRCHHOFF] * n
    ends = (0, n_chain - 1)
    if boundary == "dirichlet":
        for v in ends:
            conds[v] = DIRICHLET
    elif boundary != "kirchhoff":
        raise GraphError(f"unknown boundary variant {boundary!r}")
    return CompactMetricGraph(n, tuple(edges), tuple(conds), tuple(sorted(set(ends))), tuple(range(n_chain)))


@dataclass(frozen=True)
class DiscreteGraph:
    """Simple connected graph.  ``external_degree`` counts edges removed by a
    Dirichlet-type cut; they still enter the normalisation of the Laplacian."""

    n_vertices: int
    adjacency: tuple[tuple[int, ...], ...]
    external_degree: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.adjacency) != self.n_vertices:
            raise GraphError("adjacency list length mismatch")
        for v, nbrs in enumerate(self.adjacency):
            if v in nbrs or len(set(nbrs)) != len(nbrs):
                raise GraphError("discrete graphs must be simple")
            for u in nbrs:
                if v not in self.adjacency[u]:
                    raise GraphError("adjacency is not symmetric")
        if self.external_degree and len(self.external_degree) != self.n_vertices:
            raise GraphError("external degree length mismatch")

    @property
    def degrees(self) -> np.ndarray:
        deg = np.array([len(a) for a in self.adjacency], dtype=int)
        if self.external_degree:
            deg = deg + np.asarray(self.external_degree, dtype=int)
        return deg

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edge_list(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n_vertices) for v in self.adjacency[u] if u < v]


def discrete_graph(n_vertices: int, pairs) -> DiscreteGraph:
    adj = [[] for _ in range(n_vertices)]
    for u, v in pairs:
        adj[u].append(v)
        adj[v].append(u)
    return DiscreteGraph(n_vertices, tuple(tuple(a) for a in adj))


def build_discrete_truncation(model: ModelSpec, word: Word, boundary: str = "free") -> DiscreteGraph:
    """Combinatorial version of :func:`build_metric_truncation`.

    ``boundary="free"`` is the graph truncation with its own degrees;
    ``"dirichlet"`` keeps the degrees of the infinite graph at the two chain
    ends, i.e. the principal submatrix of the infinite operator.
    """
    for a in set(word.letters):
        if a < model.alphabet_size and not model.decoration(a).is_simple:
            raise GraphError("discrete decorations must be simple graphs")
    n, edges, n_chain = _glue(model, word, subdivide=False)
    g = discrete_graph(n, [(u, v) for u, v, _ in edges])
    if boundary == "dirichlet":
        ext = [0] * n
        ext[0] += 1
        ext[n_chain - 1] += 1
        return DiscreteGraph(g.n_vertices, g.adjacency, tuple(ext))
    if boundary != "free":
        raise GraphError(f"unknown boundary variant {boundary!r}")
    if n == 1:
        raise GraphError("degenerate truncation: a single vertex without edges")
    return g


def normalized_laplacian_matrix(g: DiscreteGraph) -> np.ndarray:
    deg = g.degrees.astype(float)
    if np.any(deg == 0):
        raise GraphError("isolated vertex: normalized Laplacian undefined")
    m = np.eye(g.n_vertices)
    inv_sqrt = 1.0 / np.sqrt(deg)
    for u, v in g.edge_list():
        w = -inv_sqrt[u] * inv_sqrt[v]
        m[u, v] = w
        m[v, u] = w
    return m


def normalized_length(model: ModelSpec, freqs: Mapping[int, float]) -> float:
    return model.spacing_L + sum(freqs.get(a, 0.0) * d.total_length for a, d in enumerate(model.decorations))


def average_vertex_count(model: ModelSpec, freqs: Mapping[int, float]) -> float:
    return sum(freqs.get(a, 0.0) * d.n_vertices for a, d in enumerate(model.decorations))


def average_edge_count(model: ModelSpec, freqs: Mapping[int, float]) -> float:
    return 1.0 + sum(freqs.get(a, 0.0) * len(d.edges) for a, d in enumerate(model.decorations))


def conversion_factor(model: ModelSpec, freqs: Mapping[int, float]) -> float:
    return average_vertex_count(model, freqs) / average_edge_count(model, freqs)


# ---------------------------------------------------------------- config files

def _parse_edges(text: str) -> tuple[tuple[int, int, float], ...]:
    edges = []
    for item in text.replace("\n", ",").split(","):
        item = item.strip()
        if not item:
            continue
        try:
            pair, length = item.split(":")
            u, v = pair.split("-")
            edges.append((int(u), int(v), float(length)))
        except ValueError as exc:
            raise GraphError(f"bad edge spec {item!r}; expected u-v:length") from exc
    return tuple(edges)


def load_model_config(path: str | Path) -> ModelSpec:
    """Read a model from an INI-style key-value file.

    ``[model]`` holds ``L``, ``alpha`` (number or golden/silver), ``theta``
    and optionally ``kind = comb`` with ``ell``.  Otherwise one section
    ``[letter.<a>]`` per letter gives ``edges = u-v:length, ...``,
    ``base`` and optionally ``vertices``.
    """
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise GraphError(f"cannot read config {path}: {exc}") from exc
    if "model" not in cp:
        raise GraphError("config needs a [model] section")
    sec = cp["model"]
    try:
        L = float(sec.get("L", "1"))
        params = None
        if "alpha" in sec:
            params = SturmianParameters(parse_alpha(sec["alpha"]), float(sec.get("theta", "0")))
        if sec.get("kind", "").strip() == "comb":
            return comb_model(L, float(sec.get("ell", "1")), params)
        decorations = []
        letters = sorted(int(s.split(".", 1)[1]) for s in cp.sections() if s.startswith("letter."))
        if letters != list(range(len(letters))) or not letters:
            raise GraphError("letters must be numbered 0..k-1")
        for a in letters:
            s = cp[f"letter.{a}"]
            edges = _parse_edges(s.get("edges", ""))
            n_vert = int(s.get("vertices", str(1 + max([max(u, v) for u, v, _ in edges], default=0))))
            decorations.append(Decoration(n_vert, edges, int(s.get("base", "0")), a))
        return ModelSpec(tuple(decorations), L, params)
    except (ValueError, KeyError) as exc:
        raise GraphError(f"invalid model config: {exc}") from exc
