"""Training-curve emission: one CSV and one SVG per tracked metric."""

from __future__ import annotations

from pathlib import Path

from ..errors import LoopwmError
from ..grpo import CSV_HEADER, TrainingLog
from ..report import svg_line_chart, write_csv


def emit_curves(log: TrainingLog, out_dir: str | Path) -> list[Path]:
    """Write {metric}.csv and {metric}.svg for every logged column.

    Deterministic bytes for a fixed log; returns the paths in sorted order.
    """
    if not log.records:
        raise LoopwmError("cannot emit curves from an empty training log")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    iterations = [float(r.iteration) for r in log.records]
    paths: list[Path] = []
    for column in CSV_HEADER[1:]:
        values = [float(getattr(r, column)) for r in log.records]
        rows = [(r.iteration, "%.6f" % v) for r, v in zip(log.records, values)]
        paths.append(write_csv(out_dir / f"{column}.csv", ("iteration", column), rows))
        paths.append(
            svg_line_chart(
                out_dir / f"{column}.svg",
                iterations,
                values,
                title=column.replace("_", " "),
                x_label="iteration",
                y_label=column.replace("_", " "),
            )
        )
    return sorted(paths)
