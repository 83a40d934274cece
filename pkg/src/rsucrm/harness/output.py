"""CSV output and static charts for trace runs."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

from .runner import COLUMNS, SUMMARY_METRICS, Comparison, MetricsRow

_INT_COLS = {"seed", "step", "vm_migrations_added", "vm_migrations_eq1_literal", "control_plane_ops", "host_count"}
_FLOAT_COLS = {"demand_mbps", "total_infrastructure_delay", "mean_unit_delay", "max_edge_utilization", "wall_time"}

CHART_METRICS = ("vm_migrations_added", "control_plane_ops", "host_count", "total_infrastructure_delay")
_LABELS = {
    "vm_migrations_added": "VM migrations",
    "vm_migrations_eq1_literal": "hosts removed",
    "control_plane_ops": "control plane modifications",
    "host_count": "service hosts",
    "total_infrastructure_delay": "infrastructure delay (s)",
    "mean_unit_delay": "mean unit delay (s)",
    "max_edge_utilization": "max edge utilization",
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows, path, timing: bool = False) -> Path:
    """Write rows in column order with LF endings.

    Wall-clock time is left blank unless ``timing`` is set, so that repeated
    runs produce identical bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) if (c != "wall_time" or timing) else "" for c in COLUMNS])
    return path


def read_csv(path) -> list[MetricsRow]:
    out = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for c in COLUMNS:
                v = rec[c]
                if v == "":
                    kw[c] = None
                elif c in _INT_COLS:
                    kw[c] = int(v)
                elif c in _FLOAT_COLS:
                    kw[c] = float(v)
                elif c == "feasible":
                    kw[c] = v == "1"
                else:
                    kw[c] = v
            out.append(MetricsRow(**kw))
    return out


def emit_summary(comparison: Comparison, path) -> Path:
    path = Path(path)
    table = comparison.table()
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(table[0]), lineterminator="\n")
        w.writeheader()
        for row in table:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def emit_charts(rows, outdir, metrics=CHART_METRICS) -> list[Path]:
    """One SVG line chart per metric: seed-averaged value per step, one series per method."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    methods = list(dict.fromkeys(r.method for r in rows))
    steps = sorted({r.step for r in rows})
    paths = []
    with matplotlib.rc_context({"svg.hashsalt": "rsucrm", "font.size": 9}):
        for metric in metrics:
            fig, ax = plt.subplots(figsize=(5.0, 3.2))
            for method in methods:
                acc = defaultdict(list)
                for r in rows:
                    v = getattr(r, metric)
                    if r.method == method and v is not None:
                        acc[r.step].append(v)
                ys = [sum(acc[s]) / len(acc[s]) if acc[s] else math.nan for s in steps]
                ax.plot([s + 1 for s in steps], ys, marker="o", ms=3, label=method)
            ax.set_xlabel("time step")
            ax.set_ylabel(_LABELS.get(metric, metric))
            ax.legend(frameon=False)
            fig.tight_layout()
            p = outdir / f"metric_{metric}.svg"
            fig.savefig(p, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(p)
    return paths


__all__ = ["emit_csv", "read_csv", "emit_summary", "emit_charts", "CHART_METRICS", "SUMMARY_METRICS"]
