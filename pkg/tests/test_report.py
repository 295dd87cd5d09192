"""Report files: delimited tables, key=value summaries, rendered figures."""

import numpy as np
import pytest

from ganmtl.metrics import MetricsReport
from ganmtl.report import (GV_CSV_NAME, GV_PNG_NAME, REPORT_NAME,
                           read_csv_rows, read_report, render_gv,
                           render_loss_curves, write_gv_table, write_report)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _report():
    rng = np.random.default_rng(40)
    gv_ref = rng.uniform(0.05, 0.4, 6)
    gv_hyp = rng.uniform(0.05, 0.4, 6)
    return MetricsReport(mcd_db=4.875, f0_rmse_hz=11.25, vuv_error_pct=6.5,
                         gv_ref=gv_ref, gv_hyp=gv_hyp,
                         gv_distance=np.abs(gv_ref - gv_hyp),
                         frames_evaluated=900, voiced_frames_evaluated=600)


def test_gv_table_round_trip(tmp_path):
    rep = _report()
    path = tmp_path / "gv.csv"
    write_gv_table(rep.gv_ref, rep.gv_hyp, path)
    rows = read_csv_rows(path)
    assert [r["dim"] for r in rows] == list(range(6))
    assert np.allclose([r["gv_ref"] for r in rows], rep.gv_ref, atol=0)
    assert np.allclose([r["gv_hyp"] for r in rows], rep.gv_hyp, atol=0)
    for r in rows:
        assert r["distance"] == abs(r["gv_ref"] - r["gv_hyp"])


def test_gv_table_is_exact_text(tmp_path):
    path = tmp_path / "gv.csv"
    write_gv_table([0.25], [0.1], path)
    assert path.read_text() == "dim,gv_ref,gv_hyp,distance\n0,0.25,0.1,0.15\n"


def test_gv_table_rejects_length_mismatch(tmp_path):
    with pytest.raises(ValueError, match="length"):
        write_gv_table([0.1, 0.2], [0.1], tmp_path / "gv.csv")


def test_gv_table_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        write_gv_table([], [], tmp_path / "gv.csv")


def test_render_gv_writes_png(tmp_path):
    rep = _report()
    path = tmp_path / "gv.png"
    render_gv(rep.gv_ref, rep.gv_hyp, path, labels=("natural", "model"))
    blob = path.read_bytes()
    assert blob.startswith(PNG_MAGIC) and len(blob) > 1000


def test_write_report_round_trip(tmp_path):
    rep = _report()
    paths = write_report(rep, tmp_path / "out")
    assert paths["report"].name == REPORT_NAME
    assert paths["gv_csv"].name == GV_CSV_NAME
    assert paths["gv_png"].name == GV_PNG_NAME
    assert read_report(paths["report"]) == rep.scalars()
    assert paths["gv_png"].read_bytes().startswith(PNG_MAGIC)


def test_loss_curves_two_panels_for_adversarial_rows(tmp_path):
    rows = [{"step": i, "mse": 1.0 / i, "adv": 0.7, "d_loss": 1.4,
             "wall_ms": 0} for i in range(1, 30)]
    path = tmp_path / "curves.png"
    render_loss_curves(rows, path)
    assert path.read_bytes().startswith(PNG_MAGIC)


def test_loss_curves_single_panel_when_no_adversary(tmp_path):
    rows = [{"step": i, "mse": 1.0 / i, "adv": float("nan"),
             "d_loss": float("nan"), "wall_ms": 0} for i in range(1, 30)]
    one = tmp_path / "one.png"
    render_loss_curves(rows, one)
    two = tmp_path / "two.png"
    render_loss_curves([dict(r, adv=0.5, d_loss=1.0) for r in rows], two)
    # the adversarial panel makes the figure taller, so the files must differ
    assert one.read_bytes() != two.read_bytes()


def test_loss_curves_reject_empty(tmp_path):
    with pytest.raises(ValueError, match="no log rows"):
        render_loss_curves([], tmp_path / "x.png")


def test_read_csv_rows_parses_floats(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("step,mse\n1,0.5\n2,0.25\n")
    assert read_csv_rows(path) == [{"step": 1.0, "mse": 0.5},
                                   {"step": 2.0, "mse": 0.25}]


def test_read_csv_rows_rejects_empty_file(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("")
    with pytest.raises(ValueError):
        read_csv_rows(path)


def test_read_csv_rows_rejects_ragged_rows(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(ValueError):
        read_csv_rows(path)


def test_read_report_ignores_blank_lines(tmp_path):
    path = tmp_path / "report.txt"
    path.write_text("mcd_db=4.5\n\nf0_rmse_hz=10.0\n")
    assert read_report(path) == {"mcd_db": 4.5, "f0_rmse_hz": 10.0}
