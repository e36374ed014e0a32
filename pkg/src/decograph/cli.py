"""Command-line front end: ``decograph <command> [options]``.

Exit codes: 0 ok, 1 a verification assertion failed, 2 bad input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .discrete_solver import correspondence_report, discrete_ids, discrete_spectrum
from .graphs import (
    GraphError,
    ModelSpec,
    average_vertex_count,
    bare_chain_model,
    build_discrete_truncation,
    build_metric_truncation,
    comb_model,
    discrete_graph,
    load_model_config,
    normalized_length,
)
from .labels import (
    detect_gaps,
    discrete_label_set,
    ids_metric,
    label_lattice_sturmian,
    match_gap_label,
    measure_jump,
    predict_jumps,
    truncation_word,
)
from .metric_solver import SolverError, metric_spectrum_general, solve_truncation
from .nodal import schwartzman_identity_check, sturm_check, verify_counting_lemma
from .words import (
    SturmianParameters,
    Word,
    WordError,
    generate_word,
    letter_frequencies,
    parse_alpha,
)

EXIT_OK, EXIT_ASSERT, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
# room for the half-line far end to double up to 3200 sites
LEMMA_WORD_LENGTH = 2 * 3200 + 2


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: ModelSpec
    params: SturmianParameters
    options: dict = field(default_factory=dict)
    output: Path | None = None

    def digest(self) -> str:
        payload = {
            "command": self.command,
            "alpha": self.params.alpha,
            "theta": self.params.theta,
            "L": self.model.spacing_L,
            "decorations": [d.to_dict() for d in self.model.decorations],
            "options": self.options,
        }
        text = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# ----------------------------------------------------------------- parsing

def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad size list {text!r}") from exc
    if not sizes or any(s < 1 for s in sizes) or sizes != sorted(set(sizes)):
        raise InputError("sizes must be positive and strictly increasing")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="model file ([model] / [letter.<a>] sections)")
    common.add_argument("--alpha", default=None, help="rotation number: float, p/q, golden or silver")
    common.add_argument("--theta", type=float, default=None)
    common.add_argument("--L", type=float, default=None, help="chain edge length")
    common.add_argument("--ell", type=float, default=None, help="tooth length (comb model)")
    common.add_argument("--model", choices=("comb", "chain"), default="comb")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--output", type=Path, default=None, help="write to a file instead of stdout")

    p = argparse.ArgumentParser(prog="decograph", description="Spectra and gap labels of decorated Sturmian graphs.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("word", parents=[common], help="Sturmian word prefix")
    s.add_argument("--n", type=int, required=True, help="number of letters")
    s.add_argument("--start", type=int, default=0)

    for name, helptext in (("build", "truncated graph"), ("spectrum", "truncation spectrum")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--n", type=int, default=None, help="truncation size (letters 0..n)")
        s.add_argument("--word", default=None, help="explicit word, e.g. 0110")
        s.add_argument("--discrete", action="store_true")
        s.add_argument("--boundary", default=None)
        if name == "spectrum":
            s.add_argument("--k-max", type=float, default=2 * math.pi)
            s.add_argument("--solver", choices=("auto", "general"), default="auto")

    s = sub.add_parser("ids", parents=[common], help="integrated density of states curves")
    s.add_argument("--sizes", default="200,400")
    s.add_argument("--E-max", type=float, default=40.0)
    s.add_argument("--boundary", default="kirchhoff")
    s.add_argument("--discrete", action="store_true")

    for name in ("gaps", "labels"):
        s = sub.add_parser(name, parents=[common], help=f"spectral {name}")
        s.add_argument("--sizes", default=None)
        s.add_argument("--window", type=float, nargs=2, default=None, metavar=("LO", "HI"))
        s.add_argument("--discrete", action="store_true")
        s.add_argument("--box", type=int, default=50, help="label search box |n|, |m| <= box")

    s = sub.add_parser("jumps", parents=[common], help="predicted (and optionally measured) IDS jumps")
    s.add_argument("--m-max", type=int, default=20)
    s.add_argument("--n-max", type=int, default=40)
    s.add_argument("--E-max", type=float, default=None)
    s.add_argument("--measure", type=int, default=None, metavar="N", help="measure at truncation size N")

    s = sub.add_parser("verify", parents=[common], help="run verification suites")
    s.add_argument("suite", choices=("counting-lemma", "sturm", "correspondence", "schwartzman", "all"))
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--t-max", type=int, default=500)
    return p


def _params(args) -> SturmianParameters:
    alpha = parse_alpha(args.alpha if args.alpha is not None else "golden")
    return SturmianParameters(alpha, args.theta if args.theta is not None else 0.0)


def make_config(args) -> RunConfig:
    if getattr(args, "config", None) is not None:
        if not args.config.exists():
            raise InputError(f"config file {args.config} does not exist")
        model = load_model_config(args.config)
        params = model.alpha_source
        if params is None or args.alpha is not None or args.theta is not None:
            params = _params(args)
    else:
        params = _params(args)
        L = args.L if args.L is not None else 1.0
        if args.model == "chain":
            model = bare_chain_model(L, params)
        else:
            model = comb_model(L, args.ell if args.ell is not None else 1.0, params)
    opts = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in ("output", "config")}
    return RunConfig(args.command, model, params, opts, args.output)


# ----------------------------------------------------------------- output

def _report(cfg: RunConfig, body: dict) -> str:
    out = {"command": cfg.command, "version": __version__, "config_hash": cfg.digest()}
    out.update(body)
    return json.dumps(out, indent=2, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output is not None:
        cfg.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _word_for(args, cfg: RunConfig) -> Word:
    if args.word:
        try:
            return Word.from_string(args.word)
        except ValueError as exc:
            raise InputError(f"bad word {args.word!r}") from exc
    if args.n is None or args.n < 1:
        raise InputError("give --n >= 1 or --word")
    return truncation_word(cfg.params, args.n)


# ----------------------------------------------------------------- commands

def cmd_word(args, cfg: RunConfig) -> int:
    if args.n < 1:
        raise InputError("--n must be at least 1")
    w = generate_word(cfg.params, args.start, args.start + args.n - 1)
    ones = sum(w.letters) / len(w)
    if args.format == "json":
        _emit(cfg, _report(cfg, {
            "word": "".join(map(str, w.letters)),
            "start": args.start,
            "frequency_1": ones,
            "predicted_frequency_1": cfg.params.alpha,
        }))
    else:
        _emit(cfg, "".join(map(str, w.letters)) + "\n"
              + f"# frequency of 1: {ones:.12g} (alpha = {cfg.params.alpha:.12g})\n")
    return EXIT_OK


def cmd_build(args, cfg: RunConfig) -> int:
    w = _word_for(args, cfg)
    if args.discrete:
        g = build_discrete_truncation(cfg.model, w, args.boundary or "free")
        if args.format == "csv":
            _emit(cfg, "u,v\n" + "".join(f"{u},{v}\n" for u, v in g.edge_list()))
        else:
            _emit(cfg, _report(cfg, {"n_vertices": g.n_vertices, "edges": g.edge_list(),
                                     "external_degree": list(g.external_degree)}))
        return EXIT_OK
    g = build_metric_truncation(cfg.model, w, args.boundary or "kirchhoff")
    if args.format == "csv":
        _emit(cfg, g.to_csv())
    else:
        _emit(cfg, _report(cfg, {"graph": json.loads(g.to_json())}))
    return EXIT_OK


def cmd_spectrum(args, cfg: RunConfig) -> int:
    w = _word_for(args, cfg)
    if args.discrete:
        ds = discrete_spectrum(cfg.model, w, args.boundary or "free")
        if args.format == "csv":
            _emit(cfg, ds.to_csv())
        else:
            _emit(cfg, _report(cfg, {"mu": [{"mu": m, "multiplicity": c} for m, c in ds.distinct()]}))
        return EXIT_OK
    boundary = args.boundary or "kirchhoff"
    if args.solver == "general":
        g = build_metric_truncation(cfg.model, w, boundary)
        spec, total = metric_spectrum_general(g, args.k_max), g.total_length
    else:
        spec, total = solve_truncation(cfg.model, w, boundary, args.k_max)
    if args.format == "csv":
        _emit(cfg, spec.to_csv())
    else:
        body = spec.to_dict()
        body["total_length"] = total
        _emit(cfg, _report(cfg, body))
    return EXIT_OK


def _metric_curves(cfg: RunConfig, sizes, E_max):
    curves = []
    for b in ("kirchhoff", "dirichlet"):
        curves += ids_metric(cfg.model, cfg.params, sizes, E_max, b).curves
    return curves


def _discrete_curves(cfg: RunConfig, sizes):
    curves = []
    for b in ("free", "dirichlet"):
        words = [truncation_word(cfg.params, n) for n in sizes]
        for c, n in zip(discrete_ids(cfg.model, words, b), sizes):
            object.__setattr__(c, "variant", b)
            curves.append(c)
    return curves


def cmd_ids(args, cfg: RunConfig) -> int:
    sizes = _sizes(args.sizes)
    if args.discrete:
        curves = _discrete_curves(cfg, sizes)
        curves = [c for c in curves if c.variant == ("dirichlet" if args.boundary == "dirichlet" else "free")]
        dists = [a.sup_distance(b, 0.0, 2.0) for a, b in zip(curves[:-1], curves[1:])]
    else:
        res = ids_metric(cfg.model, cfg.params, sizes, args.E_max, args.boundary)
        curves, dists = res.curves, res.sup_distances
    if args.format == "csv":
        lines = ["size,E,IDS"]
        for c in curves:
            lines += [f"{c.size},{e:.12g},{v:.12g}" for e, v in zip(c.breakpoints, c.values)]
        _emit(cfg, "\n".join(lines) + "\n")
    else:
        _emit(cfg, _report(cfg, {
            "sizes": sizes,
            "normalizations": [c.normalization for c in curves],
            "sup_distances": dists,
        }))
    return EXIT_OK


def _gap_reports(args, cfg: RunConfig) -> tuple[list, list]:
    alpha = cfg.params.alpha
    freqs = letter_frequencies(cfg.params)
    if args.discrete:
        sizes = _sizes(args.sizes or "500,1000")
        window = tuple(args.window or (0.0, 2.0))
        gaps = detect_gaps(_discrete_curves(cfg, sizes), window)
        lattice = discrete_label_set(alpha, average_vertex_count(cfg.model, freqs), args.box, args.box)
    else:
        sizes = _sizes(args.sizes or "200,400")
        window = tuple(args.window or (0.0, 40.0))
        if not window[0] < window[1]:
            raise InputError("window needs lo < hi")
        gaps = detect_gaps(_metric_curves(cfg, sizes, window[1]), window)
        lattice = label_lattice_sturmian(alpha, normalized_length(cfg.model, freqs), args.box, args.box)
    return gaps, lattice


def _gap_dict(g) -> dict:
    return {"lo": g.lo, "hi": g.hi, "ids_value": g.ids_value, "stability": g.stability,
            "plateaus": list(g.plateaus)}


def cmd_gaps(args, cfg: RunConfig) -> int:
    gaps, _ = _gap_reports(args, cfg)
    if args.format == "csv":
        lines = ["lo,hi,ids_value,stability"]
        lines += [f"{g.lo:.12g},{g.hi:.12g},{g.ids_value:.12g},{g.stability}" for g in gaps]
        _emit(cfg, "\n".join(lines) + "\n")
    else:
        _emit(cfg, _report(cfg, {"gaps": [_gap_dict(g) for g in gaps]}))
    return EXIT_OK


def cmd_labels(args, cfg: RunConfig) -> int:
    gaps, lattice = _gap_reports(args, cfg)
    rows = []
    for g in gaps:
        if g.stability != "stable":
            continue
        m = match_gap_label(g, lattice)
        rows.append({**_gap_dict(g), "label": m.to_dict()})
    if args.format == "csv":
        lines = ["lo,hi,ids_value,n,m,predicted,residual"]
        lines += [f"{r['lo']:.12g},{r['hi']:.12g},{r['ids_value']:.12g},{r['label']['n']},{r['label']['m']},"
                  f"{r['label']['predicted']:.12g},{r['label']['residual']:.12g}" for r in rows]
        _emit(cfg, "\n".join(lines) + "\n")
    else:
        _emit(cfg, _report(cfg, {"labels": rows}))
    return EXIT_OK


def cmd_jumps(args, cfg: RunConfig) -> int:
    if not cfg.model.is_comb():
        raise InputError("jump predictions are implemented for comb models")
    preds = predict_jumps(cfg.params.alpha, cfg.model.tooth_length, cfg.model.spacing_L, args.m_max, args.n_max)
    if args.E_max is not None:
        preds = [p for p in preds if p.energy <= args.E_max]
    rows = []
    for p in preds:
        row = p.to_dict()
        if args.measure:
            meas = measure_jump(cfg.model, cfg.params, p.energy, [args.measure])
            row["measured"] = meas.value
            row["residual"] = abs(meas.value - p.delta_N)
        rows.append(row)
    if args.format == "csv":
        lines = ["E,case,delta_N" + (",measured" if args.measure else "")]
        for r in rows:
            extra = f",{r['measured']:.12g}" if args.measure else ""
            lines.append(f"{r['E']:.12g},{r['case']},{r['delta_N']:.12g}{extra}")
        _emit(cfg, "\n".join(lines) + "\n")
    else:
        _emit(cfg, _report(cfg, {"jumps": rows}))
    return EXIT_OK


# ----------------------------------------------------------------- verify suites

def _gap_energies(cfg: RunConfig, count: int | None = None) -> list[float]:
    gaps = detect_gaps(_metric_curves(cfg, [200, 400], 40.0), (0.0, 40.0))
    mids = [g.midpoint for g in gaps if g.stability == "stable"]
    return mids if count is None else mids[:count]


def suite_counting_lemma(cfg: RunConfig, trials: int, rng) -> dict:
    energies = [-1.0] + _gap_energies(cfg)
    rows, failures = [], []
    for i in range(trials):
        theta = float(rng.uniform(0, 1))
        params = SturmianParameters(cfg.params.alpha, theta)
        t = int(rng.integers(1, 9))
        E = float(energies[int(rng.integers(len(energies)))])
        w = generate_word(params, 0, LEMMA_WORD_LENGTH)
        rep = verify_counting_lemma(cfg.model, w, t, E)
        row = {"theta": theta, "t": t, "E": E, **rep.to_dict()}
        rows.append(row)
        if not rep.equal:
            failures.append(f"trial {i}: lhs {rep.lhs} != rhs {rep.rhs}")
    return {"instances": rows, "failures": failures}


def suite_sturm(cfg: RunConfig, trials: int, rng) -> dict:
    rows, failures = [], []
    for i in range(trials):
        t = int(rng.integers(1, 9))
        L = float(rng.uniform(0.5, 2.0))
        couplings = [float(x) for x in rng.uniform(-5, 5, t - 1)]
        gamma0 = float(rng.uniform(-5, 5))
        E = float(rng.uniform(-4, 60))
        rep = sturm_check(L, couplings, gamma0, E)
        rows.append({"t": t, "L": L, "E": E, "count": rep.count, "zeros_plus_one": rep.zeros + 1})
        if not rep.holds:
            failures.append(f"trial {i}: count {rep.count} != zeros + 1 = {rep.zeros + 1}")
    return {"instances": rows, "failures": failures}


def suite_correspondence(cfg: RunConfig, trials: int, rng) -> dict:
    params = SturmianParameters(cfg.params.alpha, cfg.params.theta)
    cases = {
        f"comb n={n}": build_discrete_truncation(comb_model(1.0, 1.0, params), generate_word(params, 0, n))
        for n in (10, 20)
    }
    cases["path P5"] = discrete_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    cases["cycle C3"] = discrete_graph(3, [(0, 1), (1, 2), (2, 0)])
    cases["cycle C4"] = discrete_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    cases["star K1,4"] = discrete_graph(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
    rows, failures = [], []
    for name, g in cases.items():
        rep = correspondence_report(g)
        rows.append({"graph": name, **rep.to_dict()})
        if not rep.ok():
            failures.append(f"{name}: mu error {rep.max_mu_error:.3g}, counts {rep.counts}")
    return {"instances": rows, "failures": failures}


def suite_schwartzman(cfg: RunConfig, trials: int, rng, t_max: int = 500) -> dict:
    rows, failures = [], []
    for E in _gap_energies(cfg, 3):
        rep = schwartzman_identity_check(cfg.model, cfg.params, E, t_max)
        rows.append(rep.to_dict())
        if rep.residual > 0.05 or rep.lattice_distance > 1e-2:
            failures.append(f"E={E:.6g}: residual {rep.residual:.3g}, lattice distance {rep.lattice_distance:.3g}")
    return {"instances": rows, "failures": failures}


SUITES = {
    "counting-lemma": suite_counting_lemma,
    "sturm": suite_sturm,
    "correspondence": suite_correspondence,
    "schwartzman": suite_schwartzman,
}


def cmd_verify(args, cfg: RunConfig) -> int:
    rng = np.random.default_rng(args.seed)
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = {}
    for name in names:
        if name == "schwartzman":
            results[name] = suite_schwartzman(cfg, args.trials, rng, args.t_max)
        else:
            results[name] = SUITES[name](cfg, args.trials, rng)
    failures = [f"{n}: {f}" for n, r in results.items() for f in r["failures"]]
    if args.format == "text":
        lines = [f"{n}: {'PASS' if not r['failures'] else 'FAIL'} ({len(r['instances'])} instances)"
                 for n, r in results.items()]
        _emit(cfg, "\n".join(lines + failures) + "\n")
    else:
        _emit(cfg, _report(cfg, {"suites": results, "passed": not failures}))
    return EXIT_ASSERT if failures else EXIT_OK


COMMANDS = {
    "word": cmd_word,
    "build": cmd_build,
    "spectrum": cmd_spectrum,
    "ids": cmd_ids,
    "gaps": cmd_gaps,
    "labels": cmd_labels,
    "jumps": cmd_jumps,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = make_config(args)
        return COMMANDS[args.command](args, cfg)
    except (InputError, GraphError, WordError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
