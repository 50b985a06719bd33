"""Figures for an eBond+ sweep, one per query, drawn with the Agg backend."""

from __future__ import annotations

import typing as t
from pathlib import Path

from matplotlib.figure import Figure

from .sweep import Row

_TITLES = {
    "phi_p": ("Max. probability of no SLA violation", "probability"),
    "phi_e": ("Min. expected energy", "energy [mW min]"),
    "phi_m": ("Min. expected money", "money"),
    "phi_s": ("Min. expected SLA violations", "% of operating phases"),
}


def series(rows: t.Iterable[Row], query: str, phases: int = 1) -> t.Dict[str, t.List[t.Tuple[int, float]]]:
    """Per config, the (bandwidth, value) points of one query, by bandwidth.

    Violation counts are turned into a percentage of ``phases``.
    """
    out: t.Dict[str, t.List[t.Tuple[int, float]]] = {}
    for r in rows:
        if r.query != query:
            continue
        v = r.value
        if query == "phi_s":
            v = 100.0 * v / phases
        out.setdefault(r.config, []).append((r.bandwidth_mbit, v))
    for pts in out.values():
        pts.sort()
    return dict(sorted(out.items()))


def render_report(rows: t.Sequence[Row], out: str | Path, phases: int) -> t.List[Path]:
    """Write ``<query>.png`` for every query present in ``rows``."""
    if phases < 1:
        raise ValueError("phases must be positive")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for query in sorted({r.query for r in rows}):
        title, ylabel = _TITLES.get(query, (query, "value"))
        fig = Figure(figsize=(8, 5))
        ax = fig.add_subplot()
        for config, pts in series(rows, query, phases).items():
            finite = [(b, v) for b, v in pts if v != float("inf")]
            if finite:
                ax.plot([b for b, _ in finite], [v for _, v in finite], marker="o", markersize=3, label=config)
        ax.set_title(title)
        ax.set_xlabel("bandwidth bound [MBit/s]")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        if ax.lines:
            ax.legend(fontsize=6, ncol=3, loc="best")
        fig.tight_layout()
        path = out / f"{query}.png"
        fig.savefig(path, dpi=100, metadata={"Software": None})
        written.append(path)
    return written
