"""KPM records, evaluation metrics and CSV export."""

import csv
from dataclasses import dataclass, fields

import numpy as np

from .core import Slice

KPM_CSV_COLUMNS = ("timestamp_ms", "ue_id", "slice", "throughput_bps", "buffer_bytes",
                   "cqi", "mcs", "granted_prbs", "requested_prbs")
SUMMARY_CSV_COLUMNS = ("config_id", "slice", "metric", "median", "p25", "p75", "mean")

# numeric KpmRecord fields that aggregate() summarizes
AGGREGATED_METRICS = ("throughput_bps", "buffer_bytes", "cqi", "mcs",
                      "granted_prbs", "requested_prbs")


@dataclass(frozen=True, slots=True)
class KpmRecord:
    """One telemetry sample for one UE over one sample window.

    Constructed in the MAC hot path, so field checks live in validate()
    and run where foreign data enters (e.g. protocol decode).
    """

    timestamp_ms: int
    ue_id: int
    slice: Slice
    throughput_bps: int
    buffer_bytes: int
    cqi: int
    mcs: int
    granted_prbs: int
    requested_prbs: int

    def validate(self) -> "KpmRecord":
        if (self.timestamp_ms < 0 or self.throughput_bps < 0 or self.buffer_bytes < 0
                or self.granted_prbs < 0 or self.requested_prbs < 0):
            raise ValueError(f"negative count in {self}")
        if not 0 <= self.cqi <= 15:
            raise ValueError(f"cqi must be in [0, 15], got {self.cqi}")
        if not 0 <= self.mcs <= 28:
            raise ValueError(f"mcs must be in [0, 28], got {self.mcs}")
        return self


def prb_ratio(granted_sum: int, requested_sum: int) -> float:
    """Granted-to-requested PRB quotient in [0, 1]; zero demand counts as satisfied."""
    if granted_sum < 0 or requested_sum < 0:
        raise ValueError("PRB sums must be >= 0")
    if granted_sum > requested_sum:
        raise ValueError(f"granted ({granted_sum}) exceeds requested ({requested_sum})")
    if requested_sum == 0:
        return 1.0
    return granted_sum / requested_sum


@dataclass(frozen=True)
class SummaryRow:
    group: str
    metric: str
    median: float
    p25: float
    p75: float
    mean: float


def _lower_quantiles(values):
    arr = np.asarray(values, dtype=float)
    # lower-value interpolation for exact cross-language reproducibility
    med, p25, p75 = (float(np.percentile(arr, q, method="lower")) for q in (50, 25, 75))
    return med, p25, p75, float(arr.mean())


def aggregate(records: list[KpmRecord], group_by: str = "slice") -> list[SummaryRow]:
    """Per-group summary statistics of every numeric KPM field.

    group_by is "slice" or "ue"; groups without records are omitted.
    Medians (and quartiles) use lower-value interpolation for even counts.
    """
    if group_by == "slice":
        key = lambda r: str(r.slice)
    elif group_by == "ue":
        key = lambda r: str(r.ue_id)
    else:
        raise ValueError(f"unknown group_by {group_by!r} (expected 'slice' or 'ue')")
    groups: dict[str, list[KpmRecord]] = {}
    for record in records:
        groups.setdefault(key(record), []).append(record)
    rows = []
    for group in sorted(groups):
        for metric in AGGREGATED_METRICS:
            values = [getattr(r, metric) for r in groups[group]]
            med, p25, p75, mean = _lower_quantiles(values)
            rows.append(SummaryRow(group, metric, med, p25, p75, mean))
    return rows


def format_number(value) -> str:
    """Canonical CSV cell: integers verbatim, floats at 6 significant digits."""
    if isinstance(value, bool):
        raise TypeError("booleans are not CSV numbers")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


def export_csv(rows, columns, path) -> None:
    """Write dict rows in a stable column order with deterministic formatting."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([
                    cell if isinstance(cell, str) else format_number(cell)
                    for cell in (row[c] for c in columns)
                ])
    except OSError as exc:
        raise OSError(f"failed to write CSV {path}: {exc}") from exc


def export_kpm_csv(records: list[KpmRecord], path) -> None:
    rows = []
    for r in records:
        row = {f.name: getattr(r, f.name) for f in fields(KpmRecord)}
        row["slice"] = str(r.slice)
        rows.append(row)
    export_csv(rows, KPM_CSV_COLUMNS, path)


def export_summary_csv(config_id: str, rows: list[SummaryRow], path,
                       extra_rows: list[dict] | None = None) -> None:
    """Summary CSV: one row per (slice, metric), plus optional extra metric rows."""
    out = [{"config_id": config_id, "slice": r.group, "metric": r.metric,
            "median": r.median, "p25": r.p25, "p75": r.p75, "mean": r.mean}
           for r in rows]
    out += list(extra_rows or [])
    export_csv(out, SUMMARY_CSV_COLUMNS, path)
