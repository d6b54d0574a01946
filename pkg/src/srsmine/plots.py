"""Report figures.  Saved as PNG with fixed metadata so reruns are byte-stable."""

from __future__ import annotations

import os
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .classifier import EvaluationRow  # noqa: E402
from .statemodel import StateMachine  # noqa: E402
from .suite import CoverageReport, TestSuite  # noqa: E402

_STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "svg.hashsalt": "srsmine",
}
_FILL = "#4c72b0"
_EDGE = "#c44e52"
_METADATA = {"Software": None}


def _save(fig, path) -> str:
    path = os.fspath(path)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, metadata=_METADATA, bbox_inches="tight")
    plt.close(fig)
    return path


def coverage_figure(reports: Sequence[CoverageReport], labels: Sequence[str], path) -> str:
    """Grouped bars of covered/total per coverage category, one group per report."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        cats = ["guarded transitions", "predicate outcomes"]
        width = 0.8 / max(1, len(reports))
        for j, (rep, label) in enumerate(zip(reports, labels)):
            ratios = [
                rep.guarded_covered / rep.guarded_total if rep.guarded_total else 1.0,
                rep.pairs_covered / rep.pairs_total if rep.pairs_total else 1.0,
            ]
            xs = [i + j * width for i in range(len(cats))]
            ax.bar(xs, ratios, width=width, label=label, color=plt.cm.tab10(j))
        ax.set_xticks([i + width * (len(reports) - 1) / 2 for i in range(len(cats))])
        ax.set_xticklabels(cats)
        ax.set_ylim(0, 1.25)
        ax.set_yticks([0, 0.25, 0.5, 0.75, 1.0])
        ax.set_ylabel("fraction covered")
        ax.legend(loc="upper center", ncol=len(reports))
        return _save(fig, path)


def boundary_figure(suite: TestSuite, machine: StateMachine, path) -> str:
    """For every case, I_in and I_out on the variable where they differ, normalised to its domain."""
    decls = {v.name: v for v in machine.variables}
    rows = []
    for case in suite.cases:
        changed = [n for n in case.i_in if case.i_in[n] != case.i_out.get(n)]
        if not changed:
            continue
        v = decls[changed[0]]
        span = (v.hi - v.lo) or 1
        rows.append((f"{case.id} {v.name}", (case.i_in[v.name] - v.lo) / span, (case.i_out[v.name] - v.lo) / span))
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, max(1.5, 0.25 * len(rows) + 0.8)))
        ys = range(len(rows))
        ax.scatter([r[1] for r in rows], ys, marker="o", color=_FILL, label="I_in", zorder=3)
        ax.scatter([r[2] for r in rows], ys, marker="x", color=_EDGE, label="I_out", zorder=3)
        ax.set_yticks(list(ys))
        ax.set_yticklabels([r[0] for r in rows])
        ax.set_xlim(-0.02, 1.02)
        ax.set_xlabel("position in domain")
        ax.invert_yaxis()
        if rows:
            ax.legend(loc="best")
        return _save(fig, path)


def reduction_figure(before: int, after: int, repaired: int, path, k: Optional[int] = None) -> str:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(3.5, 3))
        ax.bar(["original", "reduced"], [before, after - repaired], color=_FILL, label="medoids")
        ax.bar(["reduced"], [repaired], bottom=[after - repaired], color=_EDGE, label="coverage repair")
        ax.set_ylabel("test cases")
        if k is not None:
            ax.set_title(f"k = {k}")
        ax.set_ylim(0, before * 1.3 if before else 1)
        ax.legend(loc="upper center", ncol=2)
        return _save(fig, path)


def evaluation_figure(rows: Sequence[EvaluationRow], path) -> str:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4, 3))
        names = [str(r.set_number) for r in rows]
        ax.bar(names, [r.correct for r in rows], color=_FILL, label="correct")
        ax.bar(names, [r.incorrect for r in rows], bottom=[r.correct for r in rows], color=_EDGE, label="incorrect")
        ax.set_xlabel("training set")
        ax.set_ylabel("sentences")
        top = max((r.total for r in rows), default=1)
        ax.set_ylim(0, top * 1.25)
        ax.legend(loc="upper center", ncol=2)
        return _save(fig, path)
