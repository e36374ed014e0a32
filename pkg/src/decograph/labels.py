"""Integrated density of states, gap detection, gap labels and IDS jumps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .graphs import ModelSpec, normalized_length
from .metric_solver import SolveOptions, Spectrum, SolverError, solve_truncation
from .words import (
    SturmianParameters,
    Word,
    WordError,
    first_digit,
    generate_word,
    is_effectively_rational,
    letter_frequencies,
)


@dataclass(frozen=True)
class IDSCurve:
    """Right-continuous step function E -> counts[i] / normalization on
    [breakpoints[i], breakpoints[i+1])."""

    breakpoints: np.ndarray
    values: np.ndarray
    normalization: float
    size: int
    kind: str = "metric"
    variant: str = "kirchhoff"

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if bp.shape != vals.shape:
            raise ValueError("breakpoints and values differ in length")
        if len(bp) > 1 and np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(vals) and (vals[0] <= 0 or np.any(np.diff(vals) <= 0)):
            raise ValueError("IDS must increase at every breakpoint")
        if self.kind == "discrete" and len(vals) and vals[-1] > 1 + 1e-12:
            raise ValueError("discrete IDS exceeds 1")

    @classmethod
    def from_spectrum(cls, spec: Spectrum, normalization: float, size: int, variant: str = "kirchhoff") -> "IDSCurve":
        counts = np.cumsum(spec.multiplicities)
        return cls(spec.eigenvalues, counts / normalization, normalization, size, "metric", variant)

    @property
    def multiplicities(self) -> np.ndarray:
        counts = np.rint(self.values * self.normalization)
        return np.diff(np.concatenate([[0.0], counts])).astype(int)

    def __call__(self, E):
        idx = np.searchsorted(self.breakpoints, E, side="right")
        padded = np.concatenate([[0.0], self.values])
        out = padded[idx]
        return float(out) if np.ndim(out) == 0 else out

    def count(self, E):
        return np.rint(np.asarray(self(E)) * self.normalization).astype(int)

    def sup_distance(self, other: "IDSCurve", lo: float, hi: float, offset: float = 1e-9) -> float:
        """sup |self - other| on [lo, hi], probed on both sides of every breakpoint."""
        pts = np.concatenate([self.breakpoints, other.breakpoints])
        pts = pts[(pts >= lo) & (pts <= hi)]
        probe = np.concatenate([pts - offset, pts + offset, [lo, hi]])
        probe = probe[(probe >= lo) & (probe <= hi)]
        return float(np.max(np.abs(self(probe) - other(probe)))) if len(probe) else 0.0

    def to_csv(self) -> str:
        lines = ["E,IDS"] + [f"{e:.12g},{v:.12g}" for e, v in zip(self.breakpoints, self.values)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Gap:
    lo: float
    hi: float
    ids_value: float
    stability: str = "stable"
    plateaus: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("gap needs lo < hi")
        if self.stability not in ("stable", "boundary-artifact"):
            raise ValueError(f"unknown stability {self.stability!r}")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class LabelMatch:
    n: int
    m: int
    predicted: float
    residual: float

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "predicted": self.predicted, "residual": self.residual}


@dataclass(frozen=True)
class JumpPrediction:
    case: str
    witnesses: tuple[tuple[str, int, int], ...]
    energy: float
    delta_N: float

    def __post_init__(self):
        if self.case not in ("one", "two", "both"):
            raise ValueError(f"unknown case {self.case!r}")
        if not self.energy > 0:
            raise ValueError("jump energies are positive")

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "witnesses": [{"case": c, "m": m, "n": n} for c, m, n in self.witnesses],
            "E": self.energy,
            "delta_N": self.delta_N,
        }


# ------------------------------------------------------------------- IDS curves

@dataclass(frozen=True)
class IDSResult:
    curves: list[IDSCurve]
    sup_distances: list[float]
    spectra: list[Spectrum] = field(default_factory=list)


def truncation_word(params: SturmianParameters, n: int) -> Word:
    """Letters at positions 0..n."""
    return generate_word(params, 0, n)


def ids_metric(
    model: ModelSpec,
    params: SturmianParameters,
    sizes: Sequence[int],
    E_max: float = 40.0,
    boundary: str = "kirchhoff",
    opts: SolveOptions | None = None,
) -> IDSResult:
    if list(sizes) != sorted(set(sizes)):
        raise ValueError("sizes must be strictly increasing")
    curves, spectra = [], []
    for n in sizes:
        spec, total = solve_truncation(model, truncation_word(params, n), boundary, math.sqrt(E_max), opts)
        spec = spec.restricted(E_max)
        spectra.append(spec)
        curves.append(IDSCurve.from_spectrum(spec, total, n, boundary))
    dists = [a.sup_distance(b, 0.0, E_max) for a, b in zip(curves[:-1], curves[1:])]
    return IDSResult(curves, dists, spectra)


# ---------------------------------------------------------------- gap detection

def weyl_spacing(normalization: float) -> Callable[[float], float]:
    """Mean level spacing 2 pi sqrt(E) / |Gamma| of a metric graph."""
    return lambda E: 2 * math.pi * math.sqrt(max(E, 0.0)) / normalization


def uniform_spacing(normalization: float, width: float = 2.0) -> Callable[[float], float]:
    return lambda E: width / normalization


def _clusters(bp: np.ndarray, mult: np.ndarray, eps: Callable[[float], float]):
    out = []
    start = 0
    for i in range(1, len(bp) + 1):
        if i == len(bp) or bp[i] - bp[i - 1] >= eps(0.5 * (bp[i] + bp[i - 1])):
            out.append((bp[start], bp[i - 1], int(mult[start:i].sum())))
            start = i
    return out


def _artifact_free(c: IDSCurve, partner: IDSCurve | None, eps, artifact_max: int, same_tol: float) -> np.ndarray:
    """Breakpoints of ``c`` after dropping boundary artifacts: isolated
    clusters of at most ``artifact_max`` eigenvalues whose count the partner
    cut condition does not reproduce."""
    bp, mult = c.breakpoints, c.multiplicities
    keep = []
    for lo, hi, tot in _clusters(bp, mult, eps):
        sel = bp[(bp >= lo) & (bp <= hi)]
        if tot <= artifact_max and partner is not None:
            p = partner.count(hi + same_tol) - partner.count(lo - same_tol)
            if p != tot:
                continue
        keep.extend(sel)
    return np.array(keep)


def _intersect(a: list[tuple[float, float]], b: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo, hi = max(a[i][0], b[j][0]), min(a[i][1], b[j][1])
        if lo < hi:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def detect_gaps(
    curves: Sequence[IDSCurve],
    window: tuple[float, float],
    eps_gap: float | Callable[[float], float] | None = None,
    delta_plateau: float | None = None,
    artifact_max: int = 2,
    same_tol: float = 1e-7,
) -> list[Gap]:
    """Energy intervals free of (non-artifact) eigenvalues in every curve.

    ``curves`` holds one curve per (size, cut condition).  The plateau of a
    size is the mean of its cut variants at the gap midpoint; the reported
    ``ids_value`` is the plateau of the largest size.  A gap is "stable" when
    all size plateaus agree within ``delta_plateau``.
    """
    sizes = sorted({c.size for c in curves})
    if len(sizes) < 2:
        raise ValueError("gap detection needs at least two truncation sizes")
    by_size: dict[int, list[IDSCurve]] = {n: [c for c in curves if c.size == n] for n in sizes}
    largest = by_size[sizes[-1]][0]
    if eps_gap is None:
        base = weyl_spacing(largest.normalization) if largest.kind == "metric" else uniform_spacing(largest.normalization)
        eps = lambda E: 4 * base(E)
    elif callable(eps_gap):
        eps = eps_gap
    else:
        eps = lambda E, v=float(eps_gap): v
    if delta_plateau is None:
        delta_plateau = 3.0 / min(by_size[sizes[0]][0].normalization, largest.normalization)
    lo_w, hi_w = window
    common: list[tuple[float, float]] | None = None
    for n in sizes:
        group = by_size[n]
        for c in group:
            partners = [p for p in group if p is not c]
            bp = _artifact_free(c, partners[0] if partners else None, eps, artifact_max, same_tol)
            bp = bp[(bp >= lo_w) & (bp <= hi_w)]
            ivs = [(a, b) for a, b in zip(bp[:-1], bp[1:]) if b - a >= eps(0.5 * (a + b))]
            common = ivs if common is None else _intersect(common, ivs)
    gaps = []
    for a, b in common or []:
        mid = 0.5 * (a + b)
        if b - a < eps(mid):
            continue
        plateaus = tuple(float(np.mean([c(mid) for c in by_size[n]])) for n in sizes)
        stable = max(plateaus) - min(plateaus) <= delta_plateau
        gaps.append(Gap(a, b, plateaus[-1], "stable" if stable else "boundary-artifact", plateaus))
    return gaps


# ------------------------------------------------------------------ label lattices

@dataclass(frozen=True)
class Label:
    value: float
    n: int
    m: int


def label_lattice_sturmian(alpha: float, Lbar: float, n_max: int = 50, m_max: int = 50, value_cap: float = math.inf) -> list[Label]:
    """{(alpha n + m) / Lbar : |n| <= n_max, |m| <= m_max} within [0, value_cap]."""
    out = []
    for n in range(-n_max, n_max + 1):
        for m in range(-m_max, m_max + 1):
            v = (alpha * n + m) / Lbar
            if -1e-15 <= v <= value_cap + 1e-15:
                out.append(Label(max(v, 0.0), n, m))
    out.sort(key=lambda lab: (lab.value, abs(lab.n), abs(lab.m), lab.n < 0))
    return out


def discrete_label_set(alpha: float, Vbar: float, n_max: int = 50, m_max: int = 50) -> list[Label]:
    return label_lattice_sturmian(alpha, Vbar, n_max, m_max, 1.0)


def match_gap_label(value: float | Gap, lattice: Sequence[Label], tie_tol: float = 1e-12) -> LabelMatch:
    """Nearest lattice point; ties prefer smaller |n|, then |m|, then n >= 0."""
    if not lattice:
        raise ValueError("empty label lattice")
    x = value.ids_value if isinstance(value, Gap) else float(value)
    vals = np.array([lab.value for lab in lattice])
    d = np.abs(vals - x)
    best = d.min()
    cands = [lattice[i] for i in np.nonzero(d <= best + tie_tol)[0]]
    pick = min(cands, key=lambda lab: (abs(lab.n), abs(lab.m), lab.n < 0))
    return LabelMatch(pick.n, pick.m, pick.value, abs(pick.value - x))


# ------------------------------------------------------------------------ jumps

def predict_jumps(alpha: float, ell: float, L: float = 1.0, m_max: int = 20, n_max: int = 40, tol: float = 1e-12) -> list[JumpPrediction]:
    """Energies where the comb IDS jumps, from the two return-word separations.

    Case one (separation c1 + 1): ell/L = (2m+1)(c1+1)/(2n), E = (pi n / (L (c1+1)))^2.
    Case two (separation c1):     ell/L = (2m+1) c1 / (2n),    E = (pi n / (L c1))^2.
    """
    if is_effectively_rational(alpha):
        raise WordError(f"alpha={alpha} is (effectively) rational")
    c1 = first_digit(alpha)
    denom = L + alpha * ell
    jumps = {"one": (1 - c1 * alpha) / denom, "two": ((c1 + 1) * alpha - 1) / denom}
    ratio = ell / L
    found: list[tuple[float, str, int, int]] = []
    for n in range(1, n_max + 1):
        for m in range(0, m_max + 1):
            if abs(ratio - (2 * m + 1) * (c1 + 1) / (2 * n)) <= tol * max(1.0, ratio):
                found.append(((math.pi * n / (L * (c1 + 1))) ** 2, "one", m, n))
            if abs(ratio - (2 * m + 1) * c1 / (2 * n)) <= tol * max(1.0, ratio):
                found.append(((math.pi * n / (L * c1)) ** 2, "two", m, n))
    found.sort()
    out: list[JumpPrediction] = []
    for E, case, m, n in found:
        if out and abs(out[-1].energy - E) <= 1e-9 * max(1.0, E):
            prev = out[-1]
            cases = {w[0] for w in prev.witnesses} | {case}
            merged = "both" if cases == {"one", "two"} else case
            dn = alpha / denom if merged == "both" else prev.delta_N
            out[-1] = JumpPrediction(merged, prev.witnesses + ((case, m, n),), prev.energy, dn)
        else:
            out.append(JumpPrediction(case, ((case, m, n),), E, jumps[case]))
    return out


@dataclass(frozen=True)
class JumpMeasurement:
    energy: float
    sizes: tuple[int, ...]
    multiplicities: tuple[int, ...]
    lengths: tuple[float, ...]

    @property
    def per_size(self) -> tuple[float, ...]:
        return tuple(k / g for k, g in zip(self.multiplicities, self.lengths))

    @property
    def value(self) -> float:
        return self.per_size[-1]


def measure_jump(
    model: ModelSpec,
    params: SturmianParameters,
    E: float,
    sizes: Sequence[int],
    merge_tol: float = 1e-7,
    boundary: str = "kirchhoff",
    opts: SolveOptions | None = None,
) -> JumpMeasurement:
    """Kernel dimension of each truncation at E divided by its total length."""
    mults, lengths = [], []
    k = math.sqrt(E) if E > 0 else 0.0
    for n in sizes:
        spec, total = solve_truncation(model, truncation_word(params, n), boundary, k + 0.05, opts)
        ks = np.sqrt(np.maximum(spec.eigenvalues, 0.0))
        mults.append(int(spec.multiplicities[np.abs(ks - k) <= merge_tol].sum()))
        lengths.append(total)
    return JumpMeasurement(E, tuple(sizes), tuple(mults), tuple(lengths))


# --------------------------------------------------------- correspondence of IDS

def correspondence_ids_check(
    E: float,
    metric_ids: Callable[[float], float],
    discrete_ids: Callable[[float], float],
    C: float,
    jump_energies: Sequence[float] = (),
    jump_tol: float = 1e-6,
) -> float:
    """Residual of N_metric(E) = floor(sqrt E / pi) + C * N_disc(1 - cos sqrt E),
    with N_disc replaced by 1 - N_disc on odd branches."""
    for J in jump_energies:
        if abs(E - J) <= jump_tol * max(1.0, J):
            raise ValueError(f"E={E} is a jump energy; the relation holds at continuity points only")
    if E < 0:
        return float(metric_ids(E))
    k = math.sqrt(E)
    m = math.floor(k / math.pi)
    mu = 1 - math.cos(k)
    nd = discrete_ids(mu)
    rhs = m + C * (nd if m % 2 == 0 else 1 - nd)
    return float(metric_ids(E) - rhs)


def comb_normalized_length(model: ModelSpec, params: SturmianParameters) -> float:
    return normalized_length(model, letter_frequencies(params))
