"""Text tables, CSV exports and figures built from persisted run results.

All aggregation is over seeds: a cell is one (method, cost-sensitive, noise
rate) combination and every reported number is the mean over its successful
runs. A metric that is undefined in any run of a cell is reported as "n/a".
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import METHODS
from .runner import RunResult

log = logging.getLogger(__name__)

NA = "n/a"
TABLE_METRICS = (("sensitivity", "Sens"), ("specificity", "Spec"), ("bac", "BAC"), ("auc", "AUC"), ("f1", "F1"))


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    method: str
    cost_sensitive: bool
    noise_rate: float

    @property
    def label(self) -> str:
        return self.method + ("+CS" if self.cost_sensitive else "")


def _fmt(v: float | None, digits: int = 3) -> str:
    return NA if v is None else f"{v:.{digits}f}"


def _mean(values: Sequence[float | None]) -> float | None:
    if not values or any(v is None for v in values):
        return None
    return float(np.mean(values))


def _ok(results: Iterable[RunResult]) -> tuple[list[RunResult], int]:
    results = list(results)
    ok = [r for r in results if r.ok and r.metrics]
    return ok, len(results) - len(ok)


def group_cells(results: Iterable[RunResult]) -> dict[Cell, list[RunResult]]:
    groups: dict[Cell, list[RunResult]] = defaultdict(list)
    for r in results:
        groups[Cell(r.method, r.cost_sensitive, float(r.noise_rate))].append(r)
    return dict(groups)


def cell_mean(runs: Sequence[RunResult], key: str) -> float | None:
    return _mean([r.metrics.get(key) for r in runs])


def scenario_names(results: Iterable[RunResult]) -> list[str]:
    names: list[str] = []
    for r in results:
        for k in r.metrics or {}:
            if k.startswith("risk_") and k[5:] not in names:
                names.append(k[5:])
    return names


def _best(values: list[float | None], higher: bool) -> set[int]:
    defined = [v for v in values if v is not None]
    if len(values) < 2 or not defined:
        return set()
    target = max(defined) if higher else min(defined)
    return {i for i, v in enumerate(values) if v is not None and round(v, 3) == round(target, 3)}


def _noise_header(eta: float) -> str:
    return f"noise {eta:g}"


# -- method comparison table --------------------------------------------------


def emit_method_table(results: Iterable[RunResult]) -> str:
    """Rows are methods with and without cost-sensitive loss; one column group per noise rate.

    Each group shows ``Sens / Spec / BAC / AUC / F1`` followed by a risk group
    with every scenario found in the results. The best value of each column is
    marked with ``*`` (highest, or lowest for risk) when there is more than one
    row to compare; ties are all marked.
    """
    ok, n_failed = _ok(results)
    if not ok:
        raise ReportError("no successful runs to tabulate")
    datasets = {r.dataset_fingerprint for r in ok}
    if len(datasets) > 1:
        raise ReportError(f"results mix {len(datasets)} datasets; tabulate one dataset at a time")

    cells = group_cells(ok)
    rows = sorted({(c.method, c.cost_sensitive) for c in cells}, key=lambda mc: (_method_order(mc[0]), mc[1]))
    etas = sorted({c.noise_rate for c in cells})
    scen = scenario_names(ok)

    # columns: (eta, metric key, higher-is-better)
    columns = [(eta, key, True) for eta in etas for key, _ in TABLE_METRICS]
    columns += [(eta, f"risk_{s}", False) for eta in etas for s in scen]
    values = [[cell_mean(cells.get(Cell(m, cs, eta), []), key) if Cell(m, cs, eta) in cells else None
               for eta, key, _ in columns] for m, cs in rows]
    marks = [_best([values[i][j] for i in range(len(rows))], higher) for j, (_, _, higher) in enumerate(columns)]

    def text(i: int, j: int) -> str:
        return _fmt(values[i][j]) + ("*" if i in marks[j] else "")

    metric_names = " / ".join(name for _, name in TABLE_METRICS)
    risk_names = " / ".join(f"Risk {s}" for s in scen)
    headers = ["method"] + [f"{_noise_header(eta)}: {metric_names}" for eta in etas]
    headers += [f"{_noise_header(eta)}: {risk_names}" for eta in etas]
    body = []
    k = len(TABLE_METRICS)
    for i, (m, cs) in enumerate(rows):
        line = [Cell(m, cs, 0.0).label]
        for g in range(len(etas)):
            line.append(" / ".join(text(i, g * k + t) for t in range(k)))
        off = len(etas) * k
        for g in range(len(etas)):
            line.append(" / ".join(text(i, off + g * len(scen) + t) for t in range(len(scen))))
        body.append(line)

    widths = [max(len(r[c]) for r in [headers] + body) for c in range(len(headers))]
    out = [" | ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    out.append("-+-".join("-" * w for w in widths))
    out += [" | ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in body]
    seeds = sorted({len(v) for v in cells.values()})
    out.append("")
    out.append(f"means over {'/'.join(map(str, seeds))} seed(s) per cell; * marks the best value in a column")
    if n_failed:
        out.append(f"{n_failed} failed run(s) excluded")
    return "\n".join(out) + "\n"


def _method_order(name: str) -> int:
    return METHODS.index(name) if name in METHODS else len(METHODS)


# -- accuracy / risk trade-off ------------------------------------------------


@dataclass(frozen=True)
class TradeoffPoint:
    cell: Cell
    bac: float | None
    risk: float | None
    collapse: bool


@dataclass(frozen=True)
class TradeoffOutput:
    csv_path: Path
    svg_path: Path | None
    notice: str | None = None


def tradeoff_points(results: Iterable[RunResult], scenario: str = "II") -> list[TradeoffPoint]:
    ok, _ = _ok(results)
    cells = group_cells(ok)
    pts = []
    for c in sorted(cells, key=lambda c: (_method_order(c.method), c.cost_sensitive, c.noise_rate)):
        runs = cells[c]
        pts.append(
            TradeoffPoint(c, cell_mean(runs, "bac"), cell_mean(runs, f"risk_{scenario}"), any(r.collapse for r in runs))
        )
    return pts


def emit_tradeoff_data(results: Iterable[RunResult], scenario: str, out_dir: str | Path) -> TradeoffOutput:
    """Write ``tradeoff_<scenario>.csv`` and a BAC-versus-risk scatter SVG into ``out_dir``.

    ``collapse_flag`` is true when any seed of the cell collapsed. When no cell
    has a defined risk for the scenario the SVG is skipped and a notice returned.
    """
    from . import plotting

    results = list(results)
    if not results:
        raise ReportError("no results given")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pts = tradeoff_points(results, scenario)
    csv_path = out / f"tradeoff_{scenario}.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "cs", "noise", "bac", "risk", "collapse_flag"])
        for p in pts:
            w.writerow([p.cell.method, p.cell.cost_sensitive, f"{p.cell.noise_rate:g}", _csv(p.bac), _csv(p.risk), p.collapse])
    drawable = [p for p in pts if p.bac is not None and p.risk is not None]
    if not drawable:
        notice = f"no defined Risk {scenario} values; scatter omitted"
        log.warning(notice)
        return TradeoffOutput(csv_path, None, notice)
    svg_path = out / f"tradeoff_{scenario}.svg"
    plotting.tradeoff_scatter(drawable, scenario, svg_path)
    return TradeoffOutput(csv_path, svg_path)


def _csv(v: float | None) -> str:
    return "" if v is None else repr(round(v, 6))


# -- noise impact (FN/FP decomposition) ---------------------------------------


@dataclass(frozen=True)
class NoiseImpactRow:
    noise_rate: float
    cost_sensitive: bool
    n_runs: int
    fn: float
    fp: float
    risks: dict
    ppr: float
    collapse: bool


@dataclass(frozen=True)
class NoiseImpact:
    method: str
    scenarios: list
    rows: list
    notes: list

    def text(self) -> str:
        head = ["noise", "cs", "runs", "FN", "FP"] + [f"Risk {s}" for s in self.scenarios] + ["ppr", "collapse"]
        body = []
        for r in self.rows:
            body.append(
                [f"{r.noise_rate:g}", "yes" if r.cost_sensitive else "no", str(r.n_runs), f"{r.fn:g}", f"{r.fp:g}"]
                + [_fmt(r.risks.get(s), 4) for s in self.scenarios]
                + [f"{r.ppr:.3f}", "COLLAPSE" if r.collapse else "-"]
            )
        widths = [max(len(x[c]) for x in [head] + body) for c in range(len(head))]
        lines = [f"noise impact: {self.method}", ""]
        lines.append("  ".join(h.rjust(w) for h, w in zip(head, widths)))
        lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in body]
        if self.notes:
            lines.append("")
            lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["noise", "cs", "runs", "fn", "fp"] + [f"risk_{s}" for s in self.scenarios] + ["ppr", "collapse_flag"])
            for r in self.rows:
                w.writerow(
                    [f"{r.noise_rate:g}", r.cost_sensitive, r.n_runs, r.fn, r.fp]
                    + [_csv(r.risks.get(s)) for s in self.scenarios]
                    + [round(r.ppr, 6), r.collapse]
                )


def noise_impact(results: Iterable[RunResult], primary: str = "II", reference: str = "I") -> NoiseImpact:
    """Per noise rate FN/FP means, risks and collapse flags for a single method.

    Consecutive noise rates (within the same CS setting) where ``primary`` risk
    falls while the ``reference`` risk (total error for the default scenarios)
    rises are annotated, with the collapse flag stated alongside.
    """
    ok, _ = _ok(results)
    methods = {r.method for r in ok}
    if len(methods) > 1:
        raise ReportError(f"noise impact needs a single method, got {sorted(methods)}")
    if not methods:
        raise ReportError("no successful runs")
    etas = {r.noise_rate for r in ok}
    if len(etas) < 2:
        raise ReportError("noise impact needs results at two or more noise rates")
    scen = scenario_names(ok)
    cells = group_cells(ok)
    rows = []
    for c in sorted(cells, key=lambda c: (c.cost_sensitive, c.noise_rate)):
        runs = cells[c]
        rows.append(
            NoiseImpactRow(
                noise_rate=c.noise_rate,
                cost_sensitive=c.cost_sensitive,
                n_runs=len(runs),
                fn=float(np.mean([r.metrics["fn"] for r in runs])),
                fp=float(np.mean([r.metrics["fp"] for r in runs])),
                risks={s: cell_mean(runs, f"risk_{s}") for s in scen},
                ppr=float(np.mean([r.metrics["ppr"] for r in runs])),
                collapse=any(r.collapse for r in runs),
            )
        )
    notes = []
    for prev, cur in zip(rows, rows[1:]):
        if prev.cost_sensitive != cur.cost_sensitive:
            continue
        a, b = prev.risks.get(primary), cur.risks.get(primary)
        if a is None or b is None or not b < a:
            continue
        msg = (
            f"Risk {primary} fell from {a:.4f} to {b:.4f} between noise {prev.noise_rate:g} and {cur.noise_rate:g}"
            f" while FN went {prev.fn:g} -> {cur.fn:g} and FP {prev.fp:g} -> {cur.fp:g}"
        )
        ra, rb = prev.risks.get(reference), cur.risks.get(reference)
        if ra is not None and rb is not None and rb > ra:
            msg += f"; total error (Risk {reference}) rose {ra:.4f} -> {rb:.4f}"
        if cur.collapse:
            msg += f"; risk fell while collapse flagged (positive prediction rate {cur.ppr:.3f})"
        else:
            msg += f"; positive prediction rate {cur.ppr:.3f}, collapse not flagged"
        notes.append(msg)
    return NoiseImpact(next(iter(methods)), scen, rows, notes)


def emit_noise_impact_report(results: Iterable[RunResult], out_dir: str | Path | None = None) -> NoiseImpact:
    """Build the noise-impact table; with ``out_dir`` also write its CSV and figure."""
    report = noise_impact(results)
    if out_dir is not None:
        from . import plotting

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write_csv(out / f"noise_impact_{report.method}.csv")
        plotting.noise_impact_figure(report, out / f"noise_impact_{report.method}.svg")
    return report
