"""Closed-form resonance asymptotics: position, Lorentzian profile and widths."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .constants import TunnelingConstants


class AsymptoticsError(ValueError):
    pass


def _check_eps(epsilon: float) -> None:
    if not epsilon >= 0:
        raise AsymptoticsError(f"epsilon must be non-negative, got {epsilon}")


def k_res_asymptotic(consts: TunnelingConstants, omega: float, epsilon: float) -> float:
    """Resonant energy ``k0^2 - 2 alpha b1^2 eps^(2 pi / omega)``."""
    _check_eps(epsilon)
    return consts.k0_sq - 2.0 * consts.alpha * consts.b1 ** 2 * epsilon ** (2.0 * math.pi / omega)


def t_asymptotic(consts: TunnelingConstants, omega: float, epsilon: float, k_sq):
    """Lorentzian transmission ``1 / (1 + P^2 ((k^2 - k_res^2) / eps^(4 pi / omega))^2)``."""
    _check_eps(epsilon)
    if epsilon == 0:
        raise AsymptoticsError("the Lorentzian degenerates at epsilon = 0")
    x = (k_sq - k_res_asymptotic(consts, omega, epsilon)) / epsilon ** (4.0 * math.pi / omega)
    return 1.0 / (1.0 + (consts.P * x) ** 2)


def width_at_height(consts: TunnelingConstants, omega: float, epsilon: float, h: float) -> float:
    """Full width of the Lorentzian at height ``h``; equals ``(2 / P) eps^(4 pi / omega)`` at ``h = 1/2``."""
    _check_eps(epsilon)
    if not 0 < h < 1:
        raise AsymptoticsError(f"height must lie in (0, 1), got {h}")
    return 2.0 / consts.P * epsilon ** (4.0 * math.pi / omega) * math.sqrt(1.0 / h - 1.0)


@dataclass(frozen=True)
class AsymptoticPeak:
    epsilon: float
    k_res_sq_a: float
    width_half: float
    P: float
    omega: float
    shift_exponent: float
    width_exponent: float

    def width(self, h: float) -> float:
        if not 0 < h < 1:
            raise AsymptoticsError(f"height must lie in (0, 1), got {h}")
        return self.width_half * math.sqrt(1.0 / h - 1.0)

    def transmission(self, k_sq):
        x = 2.0 * (k_sq - self.k_res_sq_a) / self.width_half
        return 1.0 / (1.0 + x ** 2)


def asymptotic_peak(consts: TunnelingConstants, epsilon: float, omega: float | None = None) -> AsymptoticPeak:
    omega = consts.omega if omega is None else omega
    return AsymptoticPeak(float(epsilon), k_res_asymptotic(consts, omega, epsilon),
                          width_at_height(consts, omega, epsilon, 0.5), consts.P, omega,
                          2.0 * math.pi / omega, 4.0 * math.pi / omega)


def write_asymptotic_csv(path, peaks: Iterable[AsymptoticPeak], heights: Sequence[float] = (0.2, 0.5, 0.7)) -> None:
    """Columns ``epsilon, k_res_sq_a, upsilon, delta_a_h<h>...``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "k_res_sq_a", "upsilon"] + [f"delta_a_h{h:g}" for h in heights])
        for p in peaks:
            w.writerow([repr(p.epsilon), repr(p.k_res_sq_a), repr(p.width_half)]
                       + [repr(p.width(h)) for h in heights])
