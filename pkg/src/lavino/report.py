"""Run-report serialization: a TSV record plus a rendered convergence figure.

The delimited record has one line per iteration (k, residual, tv, cumulative
NFE, ms) under a tab-separated header, preceded by ``#``-prefixed summary
lines.  Figures are rendered straight to file through the Agg canvas so no
global matplotlib state is touched.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .metrics import MetricReport
from .samplers import RunReport

REPORT_COLUMNS = ("k", "residual", "tv", "nfe", "ms")


def write_run_report(report: RunReport, path) -> None:
    lines = [
        f"# sampler = {report.sampler}",
        f"# nfe = {report.nfe}",
        f"# wall_time_s = {report.wall_time_s:.6f}",
        f"# init_residual = {report.init_residual:.9e}",
    ]
    if report.notes:
        lines.append(f"# notes = {report.notes}")
    lines.append("\t".join(REPORT_COLUMNS))
    for it in report.iterations:
        lines.append(f"{it.k}\t{it.residual:.9e}\t{it.tv:.9e}\t{it.nfe}\t{it.ms:.3f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_run_report_table(path):
    """Parse the TSV body back into a dict of column arrays (round-trip check)."""
    rows = []
    header = None
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if header is None:
            header = parts
            continue
        rows.append([float(p) for p in parts])
    if header is None:
        raise ValueError(f"no table header in {path}")
    cols = np.array(rows).T if rows else np.empty((len(header), 0))
    return dict(zip(header, cols))


def render_run_figure(report: RunReport, path) -> None:
    """Residual and TV trajectories against iteration, saved as PNG."""
    fig = Figure(figsize=(7, 4))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(1, 1, 1)
    ks = [it.k for it in report.iterations]
    res = [it.residual for it in report.iterations]
    ax.plot(ks, res, "o-", color="tab:blue", label="data residual")
    ax.axhline(report.init_residual, color="tab:blue", ls="--", lw=0.8,
               label="init residual")
    ax.set_xlabel("iteration")
    ax.set_ylabel("||Ax - y||")
    if min(res, default=0) > 0 and report.init_residual > 0:
        ax.set_yscale("log")
    tvs = [it.tv for it in report.iterations]
    if any(v > 0 for v in tvs):
        ax2 = ax.twinx()
        ax2.plot(ks, tvs, "s-", color="tab:orange", label="TV")
        ax2.set_ylabel("TV")
    ax.set_title(f"{report.sampler}: {report.nfe} NFE, {report.wall_time_s:.2f}s")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)


def write_metric_report(m: MetricReport, path) -> None:
    lines = [
        f"# psnr_mean_db = {m.psnr:.6f}",
        f"# ssim_mean = {m.ssim:.8f}",
        "frame\tpsnr_db\tssim",
    ]
    for t, (p, s) in enumerate(zip(m.psnr_per_frame, m.ssim_per_frame)):
        lines.append(f"{t}\t{p:.6f}\t{s:.8f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_metric_report(path) -> MetricReport:
    psnr_mean = ssim_mean = None
    frames = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# psnr_mean_db"):
            psnr_mean = float(line.split("=")[1])
        elif line.startswith("# ssim_mean"):
            ssim_mean = float(line.split("=")[1])
        elif line and not line.startswith(("#", "frame")):
            _, p, s = line.split("\t")
            frames.append((float(p), float(s)))
    if psnr_mean is None or ssim_mean is None:
        raise ValueError(f"malformed metric report {path}")
    arr = np.array(frames)
    return MetricReport(psnr=psnr_mean, ssim=ssim_mean,
                        psnr_per_frame=arr[:, 0], ssim_per_frame=arr[:, 1])


def render_metric_figure(m: MetricReport, path) -> None:
    fig = Figure(figsize=(7, 3.2))
    FigureCanvasAgg(fig)
    ax1 = fig.add_subplot(1, 2, 1)
    ax1.plot(m.psnr_per_frame, "o-", color="tab:blue")
    ax1.axhline(m.psnr, color="gray", ls="--", lw=0.8)
    ax1.set_xlabel("frame")
    ax1.set_ylabel("PSNR [dB]")
    ax2 = fig.add_subplot(1, 2, 2)
    ax2.plot(m.ssim_per_frame, "s-", color="tab:orange")
    ax2.axhline(m.ssim, color="gray", ls="--", lw=0.8)
    ax2.set_xlabel("frame")
    ax2.set_ylabel("SSIM")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
