"""Run records, delimited plot data, figure rendering."""
from __future__ import annotations

import json

import numpy as np
import pytest

from spinbic.reporting import (PLOT_KINDS, ReportError, RunRecord, Series,
                               emit_plot_data, load_record, make_check,
                               plain, record_to_dict, render_figures,
                               save_record)


def _sample_record() -> RunRecord:
    return RunRecord(
        command="verify-bic",
        config={"command": "verify-bic", "seed": 0},
        config_hash="ab" * 32,
        wall_time_s=1.25,
        results={"sigma_plus": 0.99, "residual": 0.01},
        checks=[make_check("bic_residual", 0.01, 0.1)],
        series=[
            Series(kind="pv_trail", label="sigma plus",
                   rows=[[1, 0.5], [2, 0.9], [3, 0.99]]),
            Series(kind="strip_torque_profile", label="junction",
                   rows=[[-2, 1e-3], [-1, 1e-2], [0, 1e-2], [1, 1e-3]]),
        ])


def test_plain_normalizes_numpy_values():
    out = plain({"a": np.float64(1.5), "b": np.arange(3),
                 "c": np.bool_(True), "d": (np.int32(2), 1 + 2j)})
    assert out == {"a": 1.5, "b": [0, 1, 2], "c": True, "d": [2, [1.0, 2.0]]}
    assert isinstance(out["a"], float) and isinstance(out["c"], bool)
    assert json.dumps(out)  # fully serializable


def test_series_rejects_unknown_kind():
    with pytest.raises(ReportError, match="unknown plot kind"):
        Series(kind="pie_chart", label="x", rows=[])


def test_make_check_comparators():
    assert make_check("a", 0.5, 1.0)["passed"]
    assert not make_check("a", 2.0, 1.0)["passed"]
    assert make_check("b", 2.0, 1.0, comparator=">=")["passed"]
    assert not make_check("b", 0.5, 1.0, comparator=">=")["passed"]
    with pytest.raises(ReportError, match="comparator"):
        make_check("c", 1.0, 1.0, comparator="!=")


def test_record_round_trip(tmp_path):
    record = _sample_record()
    path = save_record(record, tmp_path / "sub" / "record.json")
    assert path.exists()
    back = load_record(path)
    assert back == record
    assert back.passed
    # bytes are deterministic given an identical record
    again = save_record(record, tmp_path / "again.json")
    assert again.read_bytes() == path.read_bytes()


def test_record_passed_reflects_checks():
    rec = RunRecord(command="chern", config={}, config_hash="0" * 64,
                    checks=[make_check("ok", 0.0, 1.0),
                            make_check("bad", 2.0, 1.0)])
    assert not rec.passed


def test_emit_plot_data_layout(tmp_path):
    record = _sample_record()
    files = emit_plot_data(record, "pv_trail", tmp_path)
    assert [f.name for f in files] == ["pv_trail_sigma-plus.csv"]
    lines = files[0].read_text().splitlines()
    assert lines[0] == f"# config_hash={'ab' * 32}"
    assert lines[1] == "window_n[sites],partial_sum[quanta]"
    assert lines[2] == "1,0.5"
    assert len(lines) == 5


def test_emit_plot_data_errors(tmp_path):
    record = _sample_record()
    with pytest.raises(ReportError, match="unknown plot kind"):
        emit_plot_data(record, "pie_chart", tmp_path)
    with pytest.raises(ReportError, match="no 'residual_vs_size'"):
        emit_plot_data(record, "residual_vs_size", tmp_path)


def test_render_figures_writes_one_png_per_kind(tmp_path):
    record = _sample_record()
    files = render_figures(record, tmp_path)
    assert sorted(f.name for f in files) == ["pv_trail.png",
                                             "strip_torque_profile.png"]
    for f in files:
        assert f.stat().st_size > 1000
        assert f.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_render_figures_band_structure(tmp_path):
    rows = [[i, i / 8, 0.0, band, float(band) + 0.1 * i]
            for i in range(8) for band in (0, 1)]
    record = RunRecord(command="spectrum", config={}, config_hash="0" * 64,
                       series=[Series(kind="band_structure", label="bands",
                                      rows=rows)])
    files = render_figures(record, tmp_path)
    assert [f.name for f in files] == ["band_structure.png"]


def test_record_to_dict_is_json_ready():
    record = _sample_record()
    data = record_to_dict(record)
    text = json.dumps(data, sort_keys=True)
    assert "pv_trail" in text
    assert all(k in data for k in
               ("command", "config", "config_hash", "version", "results",
                "checks", "series", "wall_time_s"))


def test_all_plot_kinds_have_columns():
    from spinbic.reporting import _COLUMNS
    assert set(_COLUMNS) == set(PLOT_KINDS)
    for cols in _COLUMNS.values():
        assert all("[" in c and c.endswith("]") for c in cols)
