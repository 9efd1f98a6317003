"""Run records, delimited plot data, and rendered figures."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import __version__  # noqa: E402

PLOT_KINDS = ("pv_trail", "strip_torque_profile", "residual_vs_size",
              "band_structure")

# Column headers (with units) per plot-data kind.
_COLUMNS = {
    "pv_trail": ["window_n[sites]", "partial_sum[quanta]"],
    "strip_torque_profile": ["strip_n[sites]", "abs_trace[quanta]"],
    "residual_vs_size": ["extent[sites]", "bic_residual[quanta]"],
    "band_structure": ["k_index[1]", "k_frac_1[1]", "k_frac_2[1]",
                       "band[1]", "energy[hopping]"],
}


class ReportError(ValueError):
    """Raised when a requested report cannot be produced."""


@dataclass(frozen=True)
class Series:
    """One named table of plot data."""

    kind: str
    label: str
    rows: list

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise ReportError(f"unknown plot kind {self.kind!r}; "
                              f"known: {PLOT_KINDS}")


@dataclass(frozen=True)
class RunRecord:
    """Everything one run produced, in JSON-serializable form."""

    command: str
    config: dict
    config_hash: str
    version: str = __version__
    wall_time_s: float = 0.0
    results: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    series: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def series_of_kind(self, kind: str) -> list[Series]:
        return [s for s in self.series if s.kind == kind]


def plain(obj):
    """Recursively convert numpy scalars/arrays to plain Python values."""
    if isinstance(obj, dict):
        return {k: plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def record_to_dict(record: RunRecord) -> dict:
    return plain(asdict(record))


def record_from_dict(data: dict) -> RunRecord:
    data = dict(data)
    data["series"] = [Series(**s) for s in data.get("series", [])]
    return RunRecord(**data)


def save_record(record: RunRecord, path: str | Path) -> Path:
    """Write the record as JSON (sorted keys, two-space indent)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record_to_dict(record), sort_keys=True,
                               indent=2) + "\n")
    return path


def load_record(path: str | Path) -> RunRecord:
    """Read a record back; round-trips losslessly with save_record."""
    return record_from_dict(json.loads(Path(path).read_text()))


def make_check(name: str, value: float, tolerance: float,
               comparator: str = "<=") -> dict:
    """A named threshold check contributing to the process exit code."""
    value = float(value)
    tolerance = float(tolerance)
    if comparator == "<=":
        passed = value <= tolerance
    elif comparator == ">=":
        passed = value >= tolerance
    else:
        raise ReportError(f"unknown comparator {comparator!r}")
    return {"name": name, "value": value, "tolerance": tolerance,
            "comparator": comparator, "passed": bool(passed)}


def _safe_label(label: str) -> str:
    return "".join(c if (c.isalnum() or c in "-_") else "-" for c in label)


def emit_plot_data(record: RunRecord, kind: str,
                   out_dir: str | Path) -> list[Path]:
    """Write every series of one kind as delimited plot data.

    Parameters
    ----------
    record : RunRecord
        A completed run record.
    kind : str
        One of ``pv_trail``, ``strip_torque_profile``,
        ``residual_vs_size``, ``band_structure``.
    out_dir : path-like
        Directory receiving one ``<kind>_<label>.csv`` per series.

    Returns
    -------
    list of Path
        The files written.

    Raises
    ------
    ReportError
        If the kind is unknown or the record holds no such series.
    """
    if kind not in PLOT_KINDS:
        raise ReportError(f"unknown plot kind {kind!r}; known: {PLOT_KINDS}")
    matches = record.series_of_kind(kind)
    if not matches:
        raise ReportError(f"record for {record.command!r} holds no "
                          f"{kind!r} series")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for series in matches:
        path = out_dir / f"{kind}_{_safe_label(series.label)}.csv"
        with path.open("w", newline="") as handle:
            handle.write(f"# config_hash={record.config_hash}\n")
            writer = csv.writer(handle)
            writer.writerow(_COLUMNS[kind])
            for row in series.rows:
                writer.writerow([repr(v) for v in plain(row)])
        written.append(path)
    return written


def _figure_path(out_dir: Path, kind: str) -> Path:
    return out_dir / f"{kind}.png"


def render_figures(record: RunRecord, out_dir: str | Path) -> list[Path]:
    """Render one PNG per plot kind present in the record."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    kinds = [k for k in PLOT_KINDS if record.series_of_kind(k)]
    for kind in kinds:
        fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=150)
        if kind == "pv_trail":
            for series in record.series_of_kind(kind):
                rows = np.asarray(series.rows, dtype=float)
                ax.plot(rows[:, 0], rows[:, 1], marker=".",
                        label=series.label)
            ax.set_xlabel("window half-width n [sites]")
            ax.set_ylabel("partial trace sum [quanta]")
            ax.legend(fontsize=7)
        elif kind == "strip_torque_profile":
            for series in record.series_of_kind(kind):
                rows = np.asarray(series.rows, dtype=float)
                positive = rows[:, 1] > 0
                ax.semilogy(rows[positive, 0], rows[positive, 1],
                            marker=".", label=series.label)
            ax.set_xlabel("strip index n [sites]")
            ax.set_ylabel("|strip trace| [quanta]")
            ax.legend(fontsize=7)
        elif kind == "residual_vs_size":
            for series in record.series_of_kind(kind):
                rows = np.asarray(series.rows, dtype=float)
                ax.semilogy(rows[:, 0], rows[:, 1], marker="o",
                            label=series.label)
            ax.set_xlabel("sample half-extent [sites]")
            ax.set_ylabel("identity residual [quanta]")
            ax.legend(fontsize=7)
        else:  # band_structure
            for series in record.series_of_kind(kind):
                rows = np.asarray(series.rows, dtype=float)
                for band in np.unique(rows[:, 3]):
                    sel = rows[:, 3] == band
                    ax.plot(rows[sel, 0], rows[sel, 4], color="C0", lw=0.9)
            ax.set_xlabel("path index")
            ax.set_ylabel("energy [hopping]")
        ax.set_title(f"{record.command}  {record.config_hash[:12]}",
                     fontsize=8)
        fig.tight_layout()
        path = _figure_path(out_dir, kind)
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
