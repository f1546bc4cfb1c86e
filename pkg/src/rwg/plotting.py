"""Matplotlib figures written next to the CSV/JSON outputs (Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .asymptotics import AsymptoticPeak  # noqa: E402
from .comparison import ComparisonReport  # noqa: E402
from .peaks import NumericalPeak, SweepRow  # noqa: E402

_META = {"Software": None}  # keeps PNG bytes free of version strings


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def plot_sweep(rows: list[SweepRow], path) -> Path:
    ok = [r for r in rows if r.ok]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r.k_sq for r in ok], [r.T for r in ok], ".-", lw=1)
    bad = [r.k_sq for r in rows if not r.ok]
    if bad:
        ax.plot(bad, np.zeros(len(bad)), "rx", label="failed")
        ax.legend()
    ax.set_xlabel("$k^2$")
    ax.set_ylabel("T")
    ax.set_title("Transmission sweep")
    fig.tight_layout()
    return _save(fig, path)


def plot_peak(peak: NumericalPeak, path, asym: AsymptoticPeak | None = None) -> Path:
    """Sampled transmission around the peak, centred on the numerical maximum."""
    pts = np.array(peak.samples)
    x0 = peak.k_res_sq_n
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(pts[:, 0] - x0, pts[:, 1], "o", ms=3, label="FEM samples")
    span = np.linspace(pts[:, 0].min(), pts[:, 0].max(), 400)
    fit = peak.lorentz_fit
    if np.isfinite(fit.get("center", np.nan)):
        ax.plot(span - x0, fit["height"] / (1 + ((span - fit["center"]) / (fit["fwhm"] / 2)) ** 2), "-",
                lw=1, label="Lorentzian fit")
    if asym is not None:
        ax.plot(span - x0, asym.transmission(span - x0 + asym.k_res_sq_a), "--", lw=1,
                label="asymptotic (recentred)")
    ax.set_xlabel(f"$k^2 - {x0:.10f}$")
    ax.set_ylabel("T")
    title = "Resonance peak" if peak.epsilon is None else f"Resonance peak, eps={peak.epsilon:g}"
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_comparison(rep: ComparisonReport, out_dir) -> list[Path]:
    """Resonance shift and width scaling plus the width-ratio table."""
    out_dir = Path(out_dir)
    good = rep.good_rows()
    paths = []
    eps_all = np.array([r.epsilon for r in rep.rows])
    shift_a = np.array([rep.k0_sq - r.k_res_sq_a for r in rep.rows])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(eps_all, shift_a, "-", label="asymptotic")
    if good:
        ax.loglog([r.epsilon for r in good], [rep.k0_sq - r.k_res_sq_n for r in good], "o",
                  label=f"FEM (slope {rep.shift_slope:.3f})")
    ax.set_xlabel("eps")
    ax.set_ylabel("$k_0^2 - k_{res}^2$")
    ax.set_title("Resonance shift")
    ax.legend()
    fig.tight_layout()
    paths.append(_save(fig, out_dir / "shift.png"))

    fig, ax = plt.subplots(figsize=(6, 4))
    for h in rep.heights:
        line, = ax.loglog(eps_all, [r.delta_a[h] for r in rep.rows], "-", label=f"asymptotic h={h:g}")
        if good:
            ax.loglog([r.epsilon for r in good], [r.delta_n[h] for r in good], "o", color=line.get_color(),
                      label=f"FEM h={h:g}")
    ax.set_xlabel("eps")
    ax.set_ylabel("width $\\Delta(h, \\varepsilon)$")
    ax.set_title(f"Peak widths (FEM slope at h=1/2: {rep.width_slope:.3f})")
    ax.legend(fontsize=7)
    fig.tight_layout()
    paths.append(_save(fig, out_dir / "widths.png"))

    fig, ax = plt.subplots(figsize=(6, 4))
    for r in good:
        ax.plot(rep.heights, [r.ratio[h] for h in rep.heights], "o-", label=f"eps={r.epsilon:g}")
    ax.set_xlabel("h")
    ax.set_ylabel("$\\Delta_n / \\Delta_a$")
    ax.set_title("Width ratio")
    if good:
        ax.legend(fontsize=8)
    fig.tight_layout()
    paths.append(_save(fig, out_dir / "width_ratio.png"))
    return paths
