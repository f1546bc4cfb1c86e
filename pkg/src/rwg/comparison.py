"""Asymptotic versus numerical resonance: per-epsilon table and scaling fits."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .asymptotics import AsymptoticPeak, asymptotic_peak
from .constants import TunnelingConstants
from .geometry import WaveguideGeometry
from .peaks import NumericalPeak, NumericsOptions, PeakError, find_peak, ordered_map

log = logging.getLogger(__name__)

# relative peak width below which the solver pipeline cannot resolve the peak
CONDITIONING_FLOOR = 1e-10


@dataclass
class ComparisonRow:
    epsilon: float
    k_res_sq_a: float
    upsilon_a: float
    k_res_sq_n: float = float("nan")
    rel_diff: float = float("nan")
    T_max: float = float("nan")
    delta_a: dict = field(default_factory=dict)
    delta_n: dict = field(default_factory=dict)
    ratio: dict = field(default_factory=dict)
    flag: str = ""
    peak: NumericalPeak | None = None

    @property
    def ok(self) -> bool:
        return not self.flag


@dataclass
class ComparisonReport:
    rows: list
    heights: list
    k0_sq: float
    omega: float
    shift_slope: float = float("nan")
    width_slope: float = float("nan")
    expected_shift_slope: float = float("nan")
    expected_width_slope: float = float("nan")

    def good_rows(self) -> list:
        return [r for r in self.rows if r.ok]

    def ratio_spread(self, row: ComparisonRow) -> float:
        """Relative spread ``(max - min) / mean`` of the width ratio over heights."""
        v = np.array([row.ratio[h] for h in self.heights])
        return float((v.max() - v.min()) / v.mean())

    def to_dict(self) -> dict:
        return {
            "k0_sq": self.k0_sq,
            "omega": self.omega,
            "heights": list(self.heights),
            "shift_slope": self.shift_slope,
            "width_slope": self.width_slope,
            "expected_shift_slope": self.expected_shift_slope,
            "expected_width_slope": self.expected_width_slope,
            "rows": [
                {
                    "epsilon": r.epsilon,
                    "k_res_sq_a": r.k_res_sq_a,
                    "k_res_sq_n": r.k_res_sq_n,
                    "rel_diff": r.rel_diff,
                    "upsilon_a": r.upsilon_a,
                    "T_max": r.T_max,
                    "delta_a": {f"{h:g}": v for h, v in r.delta_a.items()},
                    "delta_n": {f"{h:g}": v for h, v in r.delta_n.items()},
                    "ratio_n_over_a": {f"{h:g}": v for h, v in r.ratio.items()},
                    "flag": r.flag,
                    "peak": r.peak.to_dict() if r.peak is not None else None,
                }
                for r in self.rows
            ],
        }


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``; nan with fewer than two points."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def ill_conditioned(peak: AsymptoticPeak, floor: float = CONDITIONING_FLOOR) -> bool:
    return peak.width_half / peak.k_res_sq_a < floor


def compare(geom: WaveguideGeometry, consts: TunnelingConstants, eps_list: Sequence[float],
            heights: Sequence[float] = (0.2, 0.5, 0.7), opts: NumericsOptions | None = None,
            tol: float = 1e-3, floor: float = CONDITIONING_FLOOR) -> ComparisonReport:
    """Numerical peak for every epsilon next to its asymptotic prediction.

    The constants are epsilon-independent and computed once by the caller.
    Epsilons whose predicted width falls below ``floor`` relative to the
    resonance energy are flagged without solving; any numerical failure is
    flagged and the report is still produced.
    """
    opts = opts or NumericsOptions()
    heights = sorted(float(h) for h in heights)
    omega = consts.omega

    def one(eps: float) -> ComparisonRow:
        a = asymptotic_peak(consts, eps, omega)
        row = ComparisonRow(float(eps), a.k_res_sq_a, a.width_half, delta_a={h: a.width(h) for h in heights})
        if ill_conditioned(a, floor):
            row.flag = (f"ill-conditioned: Upsilon/k_res^2={a.width_half / a.k_res_sq_a:.2e} "
                        f"below {floor:.0e}; skipped")
            log.warning("epsilon=%g %s", eps, row.flag)
            return row
        try:
            g = geom.with_epsilon(eps)
            peak = find_peak(g, a.k_res_sq_a, a.width_half, heights, opts, tol, k_sq_ref=consts.k0_sq)
        except (PeakError, RuntimeError, ValueError) as exc:
            row.flag = f"failed: {exc}"
            log.warning("epsilon=%g %s", eps, row.flag)
            return row
        row.peak = peak
        row.k_res_sq_n = peak.k_res_sq_n
        row.T_max = peak.T_max
        row.rel_diff = abs(a.k_res_sq_a - peak.k_res_sq_n) / a.k_res_sq_a
        row.delta_n = dict(peak.widths)
        row.ratio = {h: peak.widths[h] / row.delta_a[h] for h in heights}
        return row

    rows = ordered_map(one, sorted(float(e) for e in eps_list))
    rep = ComparisonReport(rows, heights, consts.k0_sq, omega,
                           expected_shift_slope=2 * math.pi / omega, expected_width_slope=4 * math.pi / omega)
    good = rep.good_rows()
    rep.shift_slope = loglog_slope([r.epsilon for r in good], [consts.k0_sq - r.k_res_sq_n for r in good])
    if 0.5 in heights:
        rep.width_slope = loglog_slope([r.epsilon for r in good], [r.delta_n[0.5] for r in good])
    return rep


def write_report_csv(path, rep: ComparisonReport) -> None:
    """One row per epsilon; widths and ratios get one column per height."""
    hs = rep.heights
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "k_res_sq_a", "k_res_sq_n", "rel_diff", "upsilon_a", "T_max"]
                   + [f"delta_a_h{h:g}" for h in hs] + [f"delta_n_h{h:g}" for h in hs]
                   + [f"ratio_h{h:g}" for h in hs] + ["flag"])
        for r in rep.rows:
            w.writerow([repr(r.epsilon), repr(r.k_res_sq_a), repr(r.k_res_sq_n), repr(r.rel_diff),
                        repr(r.upsilon_a), repr(r.T_max)]
                       + [repr(r.delta_a.get(h, float("nan"))) for h in hs]
                       + [repr(r.delta_n.get(h, float("nan"))) for h in hs]
                       + [repr(r.ratio.get(h, float("nan"))) for h in hs] + [r.flag])


def write_report_json(path, rep: ComparisonReport) -> None:
    with open(path, "w") as fh:
        json.dump(rep.to_dict(), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
