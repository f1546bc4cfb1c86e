"""Transverse modes of the strip ``|y| < l/2``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ModeError(ValueError):
    pass


def threshold(q: int, l: float) -> float:
    """q-th threshold ``(pi q / l)**2``."""
    return (math.pi * q / l) ** 2


@dataclass(frozen=True)
class ModeBasis:
    """Propagating modes ``exp(+-i nu_m x) Psi_m(y)`` at energy ``k_sq``.

    ``Psi_m`` carries the amplitude ``sqrt(2 / (l nu_m))`` so every mode
    transports unit flux.
    """

    l: float
    k_sq: float
    M: int
    lambdas: np.ndarray
    nus: np.ndarray

    @property
    def delta(self) -> float:
        """Decay rate of the first evanescent mode."""
        return math.sqrt(threshold(self.M + 1, self.l) - self.k_sq)

    def psi(self, m: int, y) -> np.ndarray:
        """Mode ``m`` (1-based); cosine for odd ``m``, sine for even ``m``."""
        if not 1 <= m <= self.M:
            raise ModeError(f"mode index {m} outside 1..{self.M}")
        lam, nu = self.lambdas[m - 1], self.nus[m - 1]
        amp = math.sqrt(2.0 / (self.l * nu))
        y = np.asarray(y, dtype=float)
        return amp * (np.cos(lam * y) if m % 2 else np.sin(lam * y))

    def flux_gram(self, n_quad: int = 64) -> np.ndarray:
        """Gauss-Legendre matrix of ``int_D Psi_m Psi_n dy``."""
        x, w = np.polynomial.legendre.leggauss(n_quad)
        y = 0.5 * self.l * x
        w = 0.5 * self.l * w
        P = np.array([self.psi(m, y) for m in range(1, self.M + 1)])
        return (P * w) @ P.T


def mode_basis(l: float, k_sq: float) -> ModeBasis:
    if not l > 0:
        raise ModeError(f"strip width must be positive, got {l}")
    if not k_sq > threshold(1, l):
        raise ModeError(f"k^2={k_sq:g} must exceed the first threshold {threshold(1, l):.10g}")
    q = math.sqrt(k_sq) * l / math.pi
    if abs(q - round(q)) < 1e-12 * max(1.0, q):
        raise ModeError(f"k^2={k_sq:.15g} coincides with threshold {int(round(q))}")
    M = int(math.floor(q))
    lambdas = math.pi * np.arange(1, M + 1) / l
    nus = np.sqrt(k_sq - lambdas ** 2)
    return ModeBasis(l, float(k_sq), M, lambdas, nus)
