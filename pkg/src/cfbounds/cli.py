"""Command line interface.

Exit codes: 0 success, 1 usage, 2 validation failure, 3 resource guard,
4 computation failure (undefined query, degenerate learning problem).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .counterfactual import evaluate
from .data import binarize, read_counts, read_records, write_records
from .demo import demo_counts, demo_dag, demo_skeleton
from .emcc import EmConfig, emcc_bounds
from .errors import (
    CardinalityOverflow,
    CycleError,
    EmDegenerateError,
    MissingPriorError,
    NoConvergedRunsError,
    SchemaError,
    TooLargeError,
    UndefinedQuery,
    ZeroEvidenceError,
)
from .modelio import load_binarization, load_manifest, load_model, load_queries
from .oracle import exact_query, forward_sample
from .pgm import Dag, mle_cpts, topological_sort, variable_elimination
from .report import (
    render_interval_figures,
    write_report_csv,
    write_report_json,
    write_runs_json,
)
from .scm import (
    DEFAULT_GUARD,
    MarkovClass,
    Scm,
    build_canonical_scm,
    canonical_cardinality,
    classify,
)

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3
EXIT_COMPUTE = 4

AGREEMENT_TOL = 1e-9

_RESOURCE_ERRORS = (CardinalityOverflow, TooLargeError)
_COMPUTE_ERRORS = (UndefinedQuery, NoConvergedRunsError, EmDegenerateError, ZeroEvidenceError)
_VALIDATION_ERRORS = (SchemaError, CycleError, MissingPriorError, OSError)

_DEFAULTS = {
    "runs": 100,
    "max_iter": 300,
    "tol": 1e-6,
    "seed": 0,
    "workers": None,  # filled with available parallelism at resolution time
    "guard": DEFAULT_GUARD,
}


def _setting(args, manifest: dict, key: str):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in manifest:
        return manifest[key]
    if key == "workers":
        return os.cpu_count() or 1
    return _DEFAULTS[key]


def _resolve_config(args, manifest: dict) -> EmConfig:
    return EmConfig(
        runs=_setting(args, manifest, "runs"),
        max_iterations=_setting(args, manifest, "max_iter"),
        tolerance=_setting(args, manifest, "tol"),
        base_seed=_setting(args, manifest, "seed"),
        workers=_setting(args, manifest, "workers"),
    )


def _endo_variables(model):
    if isinstance(model, Dag):
        return dict(model.variables)
    return {v.name: v for v in model.endogenous}


def _read_data(path):
    """Counts layout iff the trailing header column is literally `counts`."""
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                header = [c.strip() for c in line.split(",")]
                break
        else:
            raise SchemaError(f"{path}: empty file")
    if header and header[-1] == "counts":
        return read_counts(path), "counts"
    return read_records(path), "records"


def _interval_lines(result):
    lines = []
    for iv in result.intervals:
        q = iv.query
        lines.append(
            f"{q.kind.value} {q.cause} -> {q.effect}: "
            f"[{iv.lower:.6f}, {iv.upper:.6f}] "
            f"(runs {iv.n_runs}, converged {iv.n_converged}, undefined {iv.n_undefined})"
        )
    return lines


def _write_artifacts(result, out_dir, meta, figures: bool) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [out_dir / "report.json", out_dir / "report.csv", out_dir / "runs.json"]
    write_report_json(written[0], result, meta)
    write_report_csv(written[1], result)
    write_runs_json(written[2], result)
    if figures:
        written.extend(render_interval_figures(result, out_dir))
    return written


def cmd_validate(args) -> int:
    diagnostics = []
    cardinalities: dict[str, int | None] = {}
    markov_class = None
    guard = _setting(args, {}, "guard")

    def emit(valid: bool, code: int) -> int:
        print(
            json.dumps(
                {
                    "valid": valid,
                    "markov_class": markov_class,
                    "canonical_cardinalities": cardinalities,
                    "diagnostics": diagnostics,
                },
                indent=2,
            )
        )
        return code

    try:
        model = load_model(args.model)
    except (SchemaError, CycleError, OSError) as exc:
        diagnostics.append({"severity": "error", "check": "parse", "message": str(exc)})
        return emit(False, EXIT_VALIDATION)

    if isinstance(model, Dag):
        try:
            topological_sort(model)
        except CycleError as exc:
            diagnostics.append({"severity": "error", "check": "acyclic", "message": str(exc)})
            return emit(False, EXIT_VALIDATION)
        endo_dag = model
        markov_class = MarkovClass.MARKOVIAN.value
        diagnostics.append(
            {
                "severity": "info",
                "check": "shape",
                "message": "skeleton model; class and cardinalities refer to its canonical completion",
            }
        )
    else:
        endo_dag = model.endo_dag
        markov_class = classify(model).value
        n_priors = len(model.priors)
        diagnostics.append(
            {
                "severity": "info",
                "check": "equations",
                "message": f"{len(model.equations)} total deterministic equations; "
                f"{n_priors}/{len(model.exogenous)} exogenous priors present and normalized",
            }
        )

    code = 0
    for name in endo_dag.variables:
        var = endo_dag.variables[name]
        parents = endo_dag.parents(name)
        try:
            cardinalities[name] = canonical_cardinality(
                var.cardinality, [p.cardinality for p in parents], guard, child=name
            )
        except CardinalityOverflow as exc:
            cardinalities[name] = None
            diagnostics.append(
                {"severity": "error", "check": "cardinality-guard", "message": str(exc)}
            )
            code = EXIT_RESOURCE
    return emit(code == 0, code)


def cmd_canonicalize(args) -> int:
    from .modelio import save_model

    model = load_model(args.model)
    guard = _setting(args, {}, "guard")
    if isinstance(model, Scm):
        print(
            "note: replacing the model's equations and priors with canonical ones",
            file=sys.stderr,
        )
        dag = model.endo_dag
    else:
        dag = model
    scm = build_canonical_scm(dag, guard)
    save_model(args.out, scm)
    cards = {u.name: u.cardinality for u in scm.exogenous}
    print(f"wrote canonical model to {args.out}; disturbance cardinalities: {cards}")
    return 0


def cmd_learn(args) -> int:
    manifest = load_manifest(args.manifest) if args.manifest else {}
    config = _resolve_config(args, manifest)
    guard = _setting(args, manifest, "guard")

    model = load_model(args.model)
    scm = build_canonical_scm(model, guard) if isinstance(model, Dag) else model
    bmap = load_binarization(args.binarize) if args.binarize else None
    data, data_format = _read_data(args.data)
    if bmap is not None:
        data = binarize(data, bmap)
    queries = load_queries(args.queries, _endo_variables(scm), bmap)

    result = emcc_bounds(scm, data, queries, config)
    meta = {
        "model": str(args.model),
        "data": str(args.data),
        "data_format": data_format,
        "queries": str(args.queries),
        "binarize": str(args.binarize) if args.binarize else None,
    }
    written = _write_artifacts(result, args.out, meta, figures=not args.no_figures)
    for line in _interval_lines(result):
        print(line)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_query(args) -> int:
    model = load_model(args.model)
    if isinstance(model, Dag) or not model.has_priors:
        raise MissingPriorError(
            "query needs a fully specified model (equations and all priors)"
        )
    queries = load_queries(args.queries, _endo_variables(model))
    rows = []
    for q in queries:
        value = evaluate(model, q)
        rows.append((q, value))
        print(f"{q.kind.value} {q.cause} -> {q.effect}: {value:.9f}")
    if args.out:
        doc = [
            {
                "kind": q.kind.value,
                "cause": q.cause,
                "effect": q.effect,
                "cause_positive_state": q.cause_positive,
                "cause_negative_state": q.cause_negative,
                "effect_positive_state": q.effect_positive,
                "effect_negative_state": q.effect_negative,
                "value": value,
            }
            for q, value in rows
        ]
        Path(args.out).write_text(
            json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.out}")
    return 0


def cmd_verify(args) -> int:
    model = load_model(args.model)
    if isinstance(model, Dag) or not model.has_priors:
        raise MissingPriorError(
            "verify needs a fully specified model (equations and all priors)"
        )
    queries = load_queries(args.queries, _endo_variables(model))
    disagreements = 0
    for q in queries:
        outcomes = []
        for route in (evaluate, exact_query):
            try:
                outcomes.append(route(model, q))
            except UndefinedQuery:
                outcomes.append(None)
        twin, exact = outcomes
        label = f"{q.kind.value} {q.cause} -> {q.effect}"
        if twin is None and exact is None:
            print(f"{label}: undefined on both routes, agreed")
            continue
        if twin is None or exact is None:
            disagreements += 1
            print(f"{label}: DISAGREE (twin={twin}, enumeration={exact})")
            continue
        diff = abs(twin - exact)
        status = "agreed" if diff <= AGREEMENT_TOL else "DISAGREE"
        if status == "DISAGREE":
            disagreements += 1
        print(
            f"{label}: twin={twin:.12f} enumeration={exact:.12f} "
            f"|diff|={diff:.3g} {status}"
        )
    if disagreements:
        print(f"{disagreements} disagreement(s) above {AGREEMENT_TOL}")
        return EXIT_VALIDATION
    return 0


def cmd_replicate(args) -> int:
    counts = demo_counts()
    net = mle_cpts(demo_dag(), counts)

    def cond(evidence):
        return variable_elimination(net, ["A"], evidence).get({"A": "yes"})

    marginal_m = variable_elimination(net, ["M"]).get({"M": "yes"})
    p_pos = cond({"I": "yes"})
    p_neg = cond({"I": "no"})
    print(f"P(M=yes) = {marginal_m:.4f}")
    print(
        f"overall:      P(A=yes | I=yes) = {p_pos:.4f}   "
        f"P(A=yes | I=no) = {p_neg:.4f}   difference {p_pos - p_neg:+.4f}"
    )
    flipped = 0
    for m in ("yes", "no"):
        s_pos = cond({"I": "yes", "M": m})
        s_neg = cond({"I": "no", "M": m})
        if (s_pos - s_neg) * (p_pos - p_neg) < 0:
            flipped += 1
        print(
            f"within M={m:<3}: P(A=yes | I=yes) = {s_pos:.4f}   "
            f"P(A=yes | I=no) = {s_neg:.4f}   difference {s_pos - s_neg:+.4f}"
        )
    if flipped == 2:
        print("the marginal association reverses inside both terrain strata")

    config = _resolve_config(args, {})
    skeleton = demo_skeleton()
    from .counterfactual import CausalQuery, QueryKind

    queries = [
        CausalQuery(
            kind=kind,
            cause="I",
            effect="A",
            cause_positive="yes",
            cause_negative="no",
            effect_positive="yes",
            effect_negative="no",
        )
        for kind in QueryKind
    ]
    result = emcc_bounds(skeleton, counts, queries, config)
    print(f"interval estimates from {config.runs} restarts on the canonical model:")
    for line in _interval_lines(result):
        print(line)
    if args.out:
        meta = {"source": "embedded demo counts", "model": "canonical demo skeleton"}
        for path in _write_artifacts(result, args.out, meta, figures=not args.no_figures):
            print(f"wrote {path}")
    return 0


def cmd_sample(args) -> int:
    model = load_model(args.model)
    if isinstance(model, Dag) or not model.has_priors:
        raise MissingPriorError(
            "sampling needs a fully specified model (equations and all priors)"
        )
    data = forward_sample(model, args.n, args.seed)
    write_records(args.out, data)
    print(f"wrote {data.n_rows} records to {args.out}")
    return 0


def _add_em_flags(sub):
    sub.add_argument("--runs", type=int, default=None, help="EM restarts (default 100)")
    sub.add_argument(
        "--max-iter", dest="max_iter", type=int, default=None,
        help="iteration cap per restart (default 300)",
    )
    sub.add_argument(
        "--tol", type=float, default=None,
        help="absolute log-likelihood change that stops a restart (default 1e-6)",
    )
    sub.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    sub.add_argument(
        "--workers", type=int, default=None,
        help="parallel restart processes (default: available cores)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfbounds",
        description="Causal and counterfactual interval analysis for discrete models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file and report diagnostics")
    p.add_argument("model")
    p.add_argument("--guard", type=int, default=None, help="cardinality guard (default 2^20)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("canonicalize", help="complete a graph into a canonical model")
    p.add_argument("model")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--guard", type=int, default=None, help="cardinality guard (default 2^20)")
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("learn", help="EM restarts on data, interval report")
    p.add_argument("model", help="model file (skeletons are canonicalized on demand)")
    p.add_argument("data", help="records or counts CSV")
    p.add_argument("queries", help="queries JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--binarize", default=None, help="binarization map JSON")
    p.add_argument("--manifest", default=None, help="settings JSON (flags still win)")
    p.add_argument("--guard", type=int, default=None, help="cardinality guard (default 2^20)")
    p.add_argument("--no-figures", action="store_true", help="skip SVG charts")
    _add_em_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("query", help="evaluate queries exactly on a full model")
    p.add_argument("model")
    p.add_argument("queries")
    p.add_argument("--out", default=None, help="optional JSON output file")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", help="twin-network route against exhaustive enumeration")
    p.add_argument("model")
    p.add_argument("queries")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("replicate", help="run the built-in example end to end")
    p.add_argument("--out", default=None, help="optional output directory for artifacts")
    p.add_argument("--no-figures", action="store_true", help="skip SVG charts")
    _add_em_flags(p)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("sample", help="draw records from a full model")
    p.add_argument("model")
    p.add_argument("--n", type=int, required=True, help="number of records")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    p.add_argument("--out", required=True, help="records CSV to write")
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except _RESOURCE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except _COMPUTE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def run() -> None:
    sys.exit(main())
