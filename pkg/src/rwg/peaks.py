"""Transmission sweeps and numerical location of the resonance peak."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, curve_fit, minimize_scalar

from .geometry import WaveguideGeometry
from .modes import threshold
from .scattering import WaveguideModel, default_R_trunc, transmission

log = logging.getLogger(__name__)


class PeakError(RuntimeError):
    pass


class SweepError(ValueError):
    pass


def max_workers() -> int:
    """Parallelism cap from ``RWG_THREADS`` (default 1)."""
    try:
        n = int(os.environ.get("RWG_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def ordered_map(fn, items) -> list:
    """``map`` over a thread pool; results keep input order."""
    items = list(items)
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


@dataclass
class NumericsOptions:
    h_max: float = 0.05
    gamma_mesh: float = 0.5
    order: int = 2
    R_trunc: float | None = None
    check_condition: bool = True

    def model(self, geom: WaveguideGeometry, k_sq_ref: float) -> WaveguideModel:
        R = self.R_trunc if self.R_trunc is not None else default_R_trunc(geom.l, k_sq_ref)
        return WaveguideModel.from_geometry(geom, R, self.h_max, self.gamma_mesh, self.order,
                                            check_condition=self.check_condition)


class TransmissionFunction:
    """``k^2 -> T`` on a fixed model, caching every evaluation.

    The condition estimate runs on the first solve only; later solves on
    the same mesh differ by a tiny energy shift.
    """

    def __init__(self, model: WaveguideModel, incident: int = 1):
        self.model = model
        self.incident = incident
        self.samples: dict[float, tuple[float, float]] = {}
        self.rcond = None

    def __call__(self, k_sq: float) -> float:
        k_sq = float(k_sq)
        if k_sq not in self.samples:
            S = self.model.scattering_matrix(k_sq)
            if self.model.check_condition:
                self.rcond = S.stats.get("rcond")
                self.model.check_condition = False
            self.samples[k_sq] = (transmission(S, self.incident)[1], S.unitarity_defect)
        return self.samples[k_sq][0]

    @property
    def max_defect(self) -> float:
        return max((d for _, d in self.samples.values()), default=float("nan"))


@dataclass
class SweepRow:
    k_sq: float
    T: float
    R: float
    unitarity_defect: float
    ok: bool
    error: str = ""


def check_one_mode_grid(k_sq_grid: Sequence[float], l: float) -> None:
    lo, hi = threshold(1, l), threshold(2, l)
    bad = [k for k in k_sq_grid if not lo < k < hi]
    if bad:
        raise SweepError(f"grid leaves the one-mode window ({lo:.10g}, {hi:.10g}): {bad[:3]}")


def sweep_transmission(model: WaveguideModel, k_sq_grid: Sequence[float]) -> list[SweepRow]:
    """One scattering-matrix solve per grid point, rows in ascending ``k^2``.

    The whole grid is validated before any solve; a failing point yields a
    flagged row and the sweep continues.
    """
    grid = sorted(float(k) for k in k_sq_grid)
    if not grid:
        raise SweepError("empty k^2 grid")
    check_one_mode_grid(grid, model.l)

    def one(k):
        try:
            S = model.scattering_matrix(k)
            R, T = transmission(S)
            return SweepRow(k, T, R, S.unitarity_defect, True)
        except Exception as exc:  # flagged, sweep continues
            log.warning("sweep point k^2=%.12g failed: %s", k, exc)
            return SweepRow(k, float("nan"), float("nan"), float("nan"), False, str(exc))

    return ordered_map(one, grid)


def write_sweep_csv(path, rows: Sequence[SweepRow]) -> None:
    """Columns ``k_sq, T, R, unitarity_defect, ok, error``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k_sq", "T", "R", "unitarity_defect", "ok", "error"])
        for r in rows:
            w.writerow([repr(r.k_sq), repr(r.T), repr(r.R), repr(r.unitarity_defect), int(r.ok), r.error])


def lorentzian(x, center, half_width, height):
    return height / (1.0 + ((x - center) / half_width) ** 2)


@dataclass
class NumericalPeak:
    epsilon: float | None
    k_res_sq_n: float
    T_max: float
    widths: dict
    lorentz_fit: dict
    bracket: tuple
    samples: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "k_res_sq_n": self.k_res_sq_n,
            "T_max": self.T_max,
            "widths": {f"{h:g}": v for h, v in sorted(self.widths.items())},
            "lorentz_fit": self.lorentz_fit,
            "bracket": list(self.bracket),
            "meta": self.meta,
        }


def _check_unimodal(xs, ts, rel_noise=1e-9):
    ts = np.asarray(ts)
    scale = max(float(np.max(np.abs(ts))), 1e-300)
    d = np.diff(ts)
    sig = np.sign(np.where(np.abs(d) > rel_noise * scale, d, 0.0))
    nz = sig[sig != 0]
    dump = ", ".join(f"({x:.12g}, {t:.6g})" for x, t in zip(xs, ts))
    if len(nz) == 0:
        raise PeakError(f"non-unimodal samples (flat): {dump}")
    changes = int(np.sum(nz[1:] != nz[:-1]))
    if changes > 1 or (changes == 1 and nz[0] < 0):
        raise PeakError(f"non-unimodal samples: {dump}")
    i = int(np.argmax(ts))
    if i == 0 or i == len(ts) - 1:
        raise PeakError("bracket missed peak: widen or recheck constants")
    return i


def locate_peak(T: Callable[[float], float], bracket: tuple[float, float], heights: Sequence[float] = (0.2, 0.5, 0.7),
                tol: float = 1e-3, width_scale: float | None = None, n_scan: int = 11,
                width_rtol: float = 1e-5, epsilon: float | None = None) -> NumericalPeak:
    """Maximum of ``T`` inside ``bracket`` and its widths at ``h * T_max``.

    ``width_scale`` (default: a tenth of the bracket) sets the absolute
    tolerances: the maximiser is located to ``tol * width_scale`` and each
    flank crossing to ``width_rtol * width_scale``.
    """
    lo, hi = map(float, bracket)
    if not hi > lo:
        raise PeakError(f"invalid bracket [{lo}, {hi}]")
    for h in heights:
        if not 0 < h < 1:
            raise PeakError(f"height must lie in (0, 1), got {h}")
    scale = width_scale if width_scale is not None else (hi - lo) / 10.0
    samples: dict[float, float] = {}

    def f(x):
        x = float(x)
        if x not in samples:
            samples[x] = float(T(x))
        return samples[x]

    xs = np.linspace(lo, hi, n_scan)
    ts = [f(x) for x in xs]
    i = _check_unimodal(xs, ts)
    a, b = xs[i - 1], xs[i + 1]
    res = minimize_scalar(lambda x: -f(x), bounds=(a, b), method="bounded",
                          options={"xatol": tol * scale, "maxiter": 200})
    x_star = float(res.x)
    if f(x_star) < ts[i]:
        x_star = float(xs[i])
    t_max = f(x_star)

    widths = {}
    for h in sorted(heights):
        target = h * t_max
        g = lambda x: f(x) - target
        ends = []
        for direction in (-1, 1):
            inner = x_star
            step = abs(xs[1] - xs[0])
            outer = x_star + direction * step
            n = 0
            while g(outer) > 0:
                inner, outer = outer, x_star + direction * step * 2 ** (n + 1)
                n += 1
                if n > 40:
                    raise PeakError(f"flank at height {h} not found")
            ends.append(brentq(g, min(inner, outer), max(inner, outer), xtol=width_rtol * scale, rtol=1e-15))
        widths[h] = ends[1] - ends[0]

    pts = np.array(sorted(samples.items()))
    half = widths.get(0.5, (hi - lo) / 10.0) / 2.0 if 0.5 in widths else scale / 2.0
    try:
        popt, _ = curve_fit(lorentzian, pts[:, 0] - x_star, pts[:, 1], p0=(0.0, half, t_max), maxfev=2000)
        fit_res = float(np.linalg.norm(lorentzian(pts[:, 0] - x_star, *popt) - pts[:, 1]) / np.linalg.norm(pts[:, 1]))
        fit = {"center": float(popt[0] + x_star), "fwhm": float(2 * abs(popt[1])), "height": float(popt[2]),
               "residual": fit_res}
    except (RuntimeError, ValueError) as exc:
        fit = {"center": float("nan"), "fwhm": float("nan"), "height": float("nan"), "residual": float("nan"),
               "error": str(exc)}
    return NumericalPeak(epsilon, x_star, t_max, widths, fit, (lo, hi),
                         [(float(x), float(t)) for x, t in pts], {"n_evaluations": len(samples)})


def seek_bracket(T: Callable[[float], float], center: float, half_width: float, max_iter: int = 20,
                 total_widths: float = 10.0) -> tuple[float, float, float]:
    """Walk from a predicted centre to a bracket around a Lorentzian peak.

    Three samples of ``q = 1/T - 1`` at spacing ``w`` fix the parabola
    ``q = (x - c)^2 / w^2 + e``; the estimate is re-sampled around the new
    centre until it stays put.  Returns ``(lo, hi, fwhm_estimate)`` with a
    bracket ``total_widths`` FWHMs wide.
    """
    c, w = float(center), float(half_width)
    for _ in range(max_iter):
        x = np.array([c - w, c, c + w])
        t = np.array([T(v) for v in x])
        if np.any(t <= 0):
            w *= 4.0
            continue
        q = 1.0 / t - 1.0
        A, B, _ = np.polyfit(x - c, q, 2)
        if not A > 0:
            # concave 1/T: near a maximum flat top or far tail; widen
            w *= 4.0
            continue
        c_new = c - B / (2 * A)
        w_new = 1.0 / math.sqrt(A)
        moved = abs(c_new - c)
        c = c_new
        if moved < 0.25 * w_new and 0.25 < w_new / w < 4.0:
            fwhm = 2.0 * w_new
            return c - 0.5 * total_widths * fwhm, c + 0.5 * total_widths * fwhm, fwhm
        w = min(max(w_new, moved / 4.0), 4.0 * w) if moved > w_new else w_new
    raise PeakError(f"peak not bracketed after {max_iter} refinements near k^2={c:.12g}")


def find_peak(geom: WaveguideGeometry, k_sq_guess: float, width_guess: float, heights=(0.2, 0.5, 0.7),
              opts: NumericsOptions | None = None, tol: float = 1e-3, k_sq_ref: float | None = None,
              model: WaveguideModel | None = None) -> NumericalPeak:
    """Seek, bracket and measure the transmission peak of one waveguide."""
    opts = opts or NumericsOptions()
    model = model or opts.model(geom, k_sq_ref if k_sq_ref is not None else k_sq_guess)
    Tf = TransmissionFunction(model)
    lo, hi, fwhm = seek_bracket(Tf, k_sq_guess, 0.5 * width_guess)
    check_one_mode_grid([lo, hi], geom.l)
    peak = locate_peak(Tf, (lo, hi), heights, tol=tol, width_scale=fwhm, epsilon=geom.epsilon)
    peak.meta.update({
        "h_max": opts.h_max,
        "R_trunc": model.R_trunc,
        "n_dofs": model.forms.space.n_dofs,
        "n_triangles": int(len(model.mesh.triangles)),
        "n_solves": len(Tf.samples),
        "max_unitarity_defect": Tf.max_defect,
        "rcond": Tf.rcond,
    })
    return peak
