"""Run artifacts: the metrics report, GV tables, and rendered figures.

Text artifacts (report.txt, *.csv) are byte-deterministic for a given
input — floats are written with repr so they round-trip exactly.  Figures
are rendered with the Agg backend next to the tables they visualize.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import MetricsReport

REPORT_NAME = "report.txt"
GV_CSV_NAME = "gv.csv"
GV_PNG_NAME = "gv.png"
LOSS_PNG_NAME = "loss_curves.png"


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def _as_gv(name: str, arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D array, got shape {arr.shape}")
    return arr


def write_gv_table(gv_ref, gv_hyp, path) -> None:
    """Per-coefficient CSV: dim, gv_ref, gv_hyp, distance."""
    gv_ref = _as_gv("gv_ref", gv_ref)
    gv_hyp = _as_gv("gv_hyp", gv_hyp)
    if gv_ref.shape != gv_hyp.shape:
        raise ValueError(f"gv length mismatch: {gv_ref.shape} vs {gv_hyp.shape}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("dim,gv_ref,gv_hyp,distance\n")
        for d in range(gv_ref.size):
            r, h = float(gv_ref[d]), float(gv_hyp[d])
            f.write(f"{d},{r!r},{h!r},{abs(r - h)!r}\n")


def render_gv(gv_ref, gv_hyp, path, labels=("reference", "model")) -> None:
    """Grouped per-coefficient variance bars, reference next to model."""
    gv_ref = _as_gv("gv_ref", gv_ref)
    gv_hyp = _as_gv("gv_hyp", gv_hyp)
    dims = np.arange(gv_ref.size)
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.4
    ax.bar(dims - width / 2, gv_ref, width, label=labels[0], color="#31708f")
    ax.bar(dims + width / 2, gv_hyp, width, label=labels[1], color="#e0803d")
    ax.set_xlabel("coefficient")
    ax.set_ylabel("global variance")
    ax.set_title("Global variance per coefficient")
    ax.set_xticks(dims)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def write_report(report: MetricsReport, out_dir) -> dict[str, Path]:
    """Write report.txt, gv.csv, and gv.png under out_dir; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    txt = out / REPORT_NAME
    with open(txt, "w", encoding="utf-8") as f:
        for key, value in report.scalars().items():
            f.write(f"{key}={_fmt(value)}\n")
    csv_path = out / GV_CSV_NAME
    write_gv_table(report.gv_ref, report.gv_hyp, csv_path)
    png_path = out / GV_PNG_NAME
    render_gv(report.gv_ref, report.gv_hyp, png_path)
    return {"report": txt, "gv_csv": csv_path, "gv_png": png_path}


def read_report(path) -> dict[str, float]:
    """Parse a report.txt back into a {key: value} dict."""
    out: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"report line is not key=value: {line!r}")
            out[key] = float(value)
    return out


def render_loss_curves(rows: list[dict], path) -> None:
    """Training curves from train-log rows (step/mse/adv/d_loss keys).

    The reconstruction panel is always drawn; the adversarial panel appears
    only when the log holds finite adversarial values (i.e. not mode mse).
    """
    if not rows:
        raise ValueError("no log rows to plot")
    steps = np.array([r["step"] for r in rows], dtype=np.float64)
    mse = np.array([r["mse"] for r in rows], dtype=np.float64)
    adv = np.array([r["adv"] for r in rows], dtype=np.float64)
    d_loss = np.array([r["d_loss"] for r in rows], dtype=np.float64)
    has_adv = bool(np.isfinite(adv).any() or np.isfinite(d_loss).any())

    panels = 2 if has_adv else 1
    fig, axes = plt.subplots(panels, 1, figsize=(8, 3 * panels), sharex=True,
                             squeeze=False)
    top = axes[0][0]
    top.plot(steps, mse, color="#31708f", linewidth=1.0)
    top.set_ylabel("mean squared error")
    top.set_yscale("log")
    top.set_title("Training curves")
    if has_adv:
        bottom = axes[1][0]
        bottom.plot(steps, adv, color="#e0803d", linewidth=1.0,
                    label="generator adversarial term")
        bottom.plot(steps, d_loss, color="#5a9e6f", linewidth=1.0,
                    label="critic loss")
        bottom.set_ylabel("loss")
        bottom.legend(loc="upper right")
        bottom.set_xlabel("step")
    else:
        top.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def read_csv_rows(path) -> list[dict[str, float]]:
    """Read one of this package's CSV artifacts into numeric row dicts."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines:
        raise ValueError(f"{path} is empty")
    columns = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(columns):
            raise ValueError(f"{path}: row has {len(cells)} cells, header has {len(columns)}")
        rows.append({c: float(v) for c, v in zip(columns, cells)})
    return rows
