"""Report artifacts for interval results: JSON, CSV, and SVG charts.

Outputs are pure functions of the result object, with no timestamps,
hostnames, or locale-dependent formatting, so rerunning a command
reproduces every byte. Floats are written with repr, the shortest
round-tripping form. The charts are derived from the same interval data
as the CSV and are never a source of truth.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .counterfactual import QueryKind
from .emcc import EmccResult, IntervalEstimate

CSV_COLUMNS = (
    "query_kind",
    "cause",
    "effect",
    "lower",
    "upper",
    "n_runs",
    "n_converged",
    "n_undefined",
)

_KIND_ORDER = {k: i for i, k in enumerate(QueryKind)}
_DIFFERENCE_KINDS = {QueryKind.COND_DIFF, QueryKind.ACE}


def _query_doc(interval: IntervalEstimate) -> dict:
    q = interval.query
    return {
        "kind": q.kind.value,
        "cause": q.cause,
        "effect": q.effect,
        "cause_positive_state": q.cause_positive,
        "cause_negative_state": q.cause_negative,
        "effect_positive_state": q.effect_positive,
        "effect_negative_state": q.effect_negative,
        "lower": interval.lower,
        "upper": interval.upper,
        "mean": interval.mean,
        "n_runs": interval.n_runs,
        "n_converged": interval.n_converged,
        "n_undefined": interval.n_undefined,
    }


def build_report(result: EmccResult, meta: dict | None = None) -> dict:
    config = result.config
    return {
        "meta": dict(meta or {}),
        "config": {
            "runs": config.runs,
            "max_iterations": config.max_iterations,
            "tolerance": config.tolerance,
            "base_seed": config.base_seed,
            "min_probability_floor": config.min_probability_floor,
            "workers": config.workers,
        },
        "queries": [_query_doc(iv) for iv in result.intervals],
    }


def write_report_json(path, result: EmccResult, meta: dict | None = None) -> None:
    Path(path).write_text(
        json.dumps(build_report(result, meta), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def write_report_csv(path, result: EmccResult) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for iv in result.intervals:
        q = iv.query
        lines.append(
            ",".join(
                [
                    q.kind.value,
                    q.cause,
                    q.effect,
                    repr(iv.lower),
                    repr(iv.upper),
                    str(iv.n_runs),
                    str(iv.n_converged),
                    str(iv.n_undefined),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_runs_json(path, result: EmccResult) -> None:
    """Per-restart diagnostics: seed, convergence, iteration count, final
    log-likelihood, and the value each query took (null when undefined)."""
    doc = []
    for i, run in enumerate(result.runs):
        doc.append(
            {
                "run": i,
                "seed": run.seed,
                "converged": run.converged,
                "iterations": run.iterations,
                "log_likelihood": run.log_likelihood,
                "query_values": list(result.per_run_values[i]),
            }
        )
    Path(path).write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name) or "effect"


def render_interval_figures(result: EmccResult, out_dir) -> list[Path]:
    """One SVG per effect variable, intervals drawn as vertical segments
    with the per-run mean marked. Deterministic output: fixed hash salt,
    no embedded date."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_effect: dict[str, list[IntervalEstimate]] = {}
    for iv in result.intervals:
        by_effect.setdefault(iv.query.effect, []).append(iv)

    written = []
    with matplotlib.rc_context({"svg.hashsalt": "cfbounds"}):
        for effect, intervals in by_effect.items():
            intervals = sorted(
                intervals, key=lambda iv: (_KIND_ORDER[iv.query.kind], iv.query.cause)
            )
            fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(intervals) + 1.5), 4.0))
            positions = range(len(intervals))
            for x, iv in zip(positions, intervals):
                ax.vlines(x, iv.lower, iv.upper, color="tab:blue", linewidth=2.5)
                for y in (iv.lower, iv.upper):
                    ax.hlines(y, x - 0.12, x + 0.12, color="tab:blue", linewidth=2.5)
                ax.plot([x], [iv.mean], marker="o", color="tab:orange", markersize=4)
            ax.set_xticks(list(positions))
            ax.set_xticklabels(
                [f"{iv.query.kind.value}\n{iv.query.cause}" for iv in intervals]
            )
            if any(iv.query.kind in _DIFFERENCE_KINDS for iv in intervals):
                ax.set_ylim(-1.05, 1.05)
                ax.axhline(0.0, color="0.7", linewidth=0.8, zorder=0)
            else:
                ax.set_ylim(-0.05, 1.05)
            ax.set_ylabel("value across restarts")
            ax.set_title(f"Interval estimates for effect {effect}")
            ax.margins(x=0.15)
            fig.tight_layout()
            target = out_dir / f"intervals_{_safe_name(effect)}.svg"
            fig.savefig(target, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(target)
    return written
