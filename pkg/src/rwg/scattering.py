"""Scattering matrix of the truncated waveguide by a least-squares functional.

The truncated domain ends at ``x = x_left`` (GAMMA_1) and ``x = x_right``
(GAMMA_2).  For each propagating mode two Robin problems are solved, one
with incoming-wave data (``v+``) and one with outgoing-wave data (``v-``);
the scattering matrix ``s`` then solves ``s E + F = 0`` where ``E`` and
``F`` collect boundary inner products of the mismatch between the computed
traces and the ideal mode traces.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .fem import AssembledForms, BoundaryQuadrature, Factorization, assemble, boundary_load, boundary_quadrature
from .geometry import Tag, WaveguideGeometry, build_strip, build_waveguide
from .mesh import Mesh, triangulate
from .modes import ModeBasis, mode_basis, threshold

log = logging.getLogger(__name__)

EVANESCENT_TOL = 1e-8


class ScatteringError(RuntimeError):
    pass


@dataclass
class ScatteringMatrix:
    s: np.ndarray
    k_sq: float
    epsilon: float | None
    R_trunc: float
    h_max: float
    zeta: float
    unitarity_defect: float
    symmetry_defect: float
    E: np.ndarray | None = None
    F: np.ndarray | None = None
    G: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.s.shape[0] // 2


@dataclass
class RadiationSolutions:
    """Full-dof values of ``v_j^+`` and ``v_j^-``, j = 1..2M (0-based lists)."""

    plus: list
    minus: list
    zeta: float
    factorization_rcond: float | None = None


def default_R_trunc(l: float, k_sq: float, tol: float = EVANESCENT_TOL) -> float:
    """``max(3 l, 6 / delta, ln(1/tol) / delta)`` with delta the first evanescent decay rate."""
    basis = mode_basis(l, k_sq)
    delta = basis.delta
    return max(3.0 * l, 6.0 / delta, math.log(1.0 / tol) / delta)


class WaveguideModel:
    """Meshed and assembled truncated waveguide, reusable across energies.

    ``x_left`` and ``x_right`` are the abscissae of GAMMA_1 and GAMMA_2 and
    ``R_trunc`` / ``d`` enter the mode phases exactly as
    ``x_left = -R``, ``x_right = d + R``.
    """

    def __init__(self, mesh: Mesh, l: float, R_trunc: float, d: float, order: int = 2,
                 epsilon: float | None = None, h_max: float = float("nan"), symmetric: bool = True,
                 check_condition: bool = True):
        self.mesh = mesh
        self.l = l
        self.R_trunc = R_trunc
        self.d = d
        self.order = order
        self.epsilon = epsilon
        self.h_max = h_max
        self.symmetric = symmetric
        self.check_condition = check_condition
        self.forms: AssembledForms = assemble(mesh, order)
        self.quad = {Tag.GAMMA_1: boundary_quadrature(self.forms.space, Tag.GAMMA_1),
                     Tag.GAMMA_2: boundary_quadrature(self.forms.space, Tag.GAMMA_2)}

    @classmethod
    def from_geometry(cls, geom: WaveguideGeometry, R_trunc: float, h_max: float = 0.05,
                      gamma_mesh: float = 0.5, order: int = 2, check_condition: bool = True) -> "WaveguideModel":
        b = build_waveguide(geom, R_trunc, h_max)
        corners = [(0.0, 0.0), (geom.d, 0.0)]
        mesh = triangulate(b, h_max, gamma_mesh, r_ref=geom.l, extra_corners=corners)
        return cls(mesh, geom.l, R_trunc, geom.d, order, epsilon=geom.epsilon, h_max=h_max,
                   check_condition=check_condition)

    @classmethod
    def straight_strip(cls, l: float, R_trunc: float, d: float = 0.0, h_max: float = 0.05,
                       order: int = 2) -> "WaveguideModel":
        mesh = triangulate(build_strip(l, -R_trunc, d + R_trunc), h_max, 0.0)
        return cls(mesh, l, R_trunc, d, order, epsilon=None, h_max=h_max)

    def _y(self, tag: Tag) -> np.ndarray:
        return self.quad[tag].points[:, 1]

    def mode_trace(self, basis: ModeBasis, m: int, sign: int, tag: Tag) -> np.ndarray:
        """Trace of ``exp(sign * i nu_m x) Psi_m`` on one end."""
        x = -self.R_trunc if tag == Tag.GAMMA_1 else self.d + self.R_trunc
        nu = basis.nus[m - 1]
        return np.exp(sign * 1j * nu * x) * basis.psi(m, self._y(tag))

    def radiation_solutions(self, basis: ModeBasis, zeta: float, skip_zero: bool = True) -> RadiationSolutions:
        """Solve the 4M Robin problems with one factorization."""
        if zeta == 0:
            raise ScatteringError("zeta must be nonzero")
        M = basis.M
        fac = Factorization(self.forms, basis.k_sq, {Tag.GAMMA_1: 1j * zeta, Tag.GAMMA_2: 1j * zeta},
                            check_condition=self.check_condition)
        R, d = self.R_trunc, self.d
        n = self.forms.space.n_dofs
        plus, minus = [], []
        for out, sgn in ((plus, -1.0), (minus, 1.0)):
            for j in range(1, 2 * M + 1):
                m = j if j <= M else j - M
                nu = basis.nus[m - 1]
                tag = Tag.GAMMA_1 if j <= M else Tag.GAMMA_2
                dist = R if j <= M else d + R
                # i(-+nu + zeta) exp(-+ i nu dist) Psi_m, upper sign for v+
                amp = 1j * (sgn * nu + zeta) * np.exp(sgn * 1j * nu * dist)
                if skip_zero and amp == 0:
                    out.append(np.zeros(n, dtype=complex))
                    continue
                load = boundary_load(self.forms, tag, lambda p, m=m, amp=amp: amp * basis.psi(m, p[:, 1]))
                out.append(fac.solve(load).astype(complex))
        return RadiationSolutions(plus, minus, zeta, fac.rcond)

    def assemble_EFG(self, vpm: RadiationSolutions, basis: ModeBasis):
        """Matrices E, F and diagonal G of the quadratic functional."""
        M = basis.M
        q1, q2 = self.quad[Tag.GAMMA_1], self.quad[Tag.GAMMA_2]

        def traces(vals):
            return q1.trace(vals), q2.trace(vals)

        r, p = [], []
        for j in range(1, 2 * M + 1):
            m = j if j <= M else j - M
            t1, t2 = traces(vpm.minus[j - 1])
            u1, u2 = traces(vpm.plus[j - 1])
            if j <= M:
                t1 = t1 - self.mode_trace(basis, m, -1, Tag.GAMMA_1)
                u1 = u1 - self.mode_trace(basis, m, +1, Tag.GAMMA_1)
            else:
                t2 = t2 - self.mode_trace(basis, m, +1, Tag.GAMMA_2)
                u2 = u2 - self.mode_trace(basis, m, -1, Tag.GAMMA_2)
            r.append((t1, t2))
            p.append((u1, u2))

        def ip(a, b):
            return q1.inner(a[0], b[0]) + q2.inner(a[1], b[1])

        n = 2 * M
        E = np.array([[ip(r[i], r[j]) for j in range(n)] for i in range(n)])
        F = np.array([[ip(p[i], r[j]) for j in range(n)] for i in range(n)])
        G = np.array([ip(p[i], p[i]).real for i in range(n)])
        return E, F, G

    def scattering_matrix(self, k_sq: float, zeta: float | None = None, general: bool = False,
                          keep_forms: bool = False) -> ScatteringMatrix:
        basis = mode_basis(self.l, k_sq)
        if math.exp(-basis.delta * self.R_trunc) > 1.01 * EVANESCENT_TOL:
            log.warning("R_trunc=%.3g leaves evanescent factor exp(-delta R)=%.2e above %.0e",
                        self.R_trunc, math.exp(-basis.delta * self.R_trunc), EVANESCENT_TOL)
        M = basis.M
        if zeta is None:
            zeta = -basis.nus[0]
        vpm = self.radiation_solutions(basis, zeta)
        E, F, G = self.assemble_EFG(vpm, basis)
        if M == 1 and zeta == -basis.nus[0] and not general:
            s = -basis.nus[0] * F
        else:
            try:
                s = -np.linalg.solve(E.T, F.T).T
            except np.linalg.LinAlgError as exc:
                raise ScatteringError(f"singular E matrix at k^2={k_sq}") from exc
        return make_scattering_matrix(s, k_sq, self, zeta, E if keep_forms else None,
                                      F if keep_forms else None, G if keep_forms else None,
                                      {"rcond": vpm.factorization_rcond, "n_dofs": self.forms.space.n_dofs})


def make_scattering_matrix(s, k_sq, model: WaveguideModel, zeta, E=None, F=None, G=None, stats=None):
    n = s.shape[0]
    unit = float(np.max(np.abs(s.conj().T @ s - np.eye(n))))
    M = n // 2
    if model.symmetric and n == 2:
        # x -> d - x with phases referenced to absolute x: s22 = exp(-2 i nu d) s11, s21 = s12
        nu = math.sqrt(k_sq - threshold(1, model.l))
        sym = float(max(abs(s[1, 1] - np.exp(-2j * nu * model.d) * s[0, 0]), abs(s[1, 0] - s[0, 1])))
    else:
        sym = float("nan")
    return ScatteringMatrix(s, float(k_sq), model.epsilon, model.R_trunc, model.h_max, float(zeta),
                            unit, sym, E, F, G, stats or {})


def scattering_matrix(geom: WaveguideGeometry, k_sq: float, R_trunc: float | None = None,
                      h_max: float = 0.05, **kw) -> ScatteringMatrix:
    """One-shot scattering matrix; use :class:`WaveguideModel` for sweeps."""
    if R_trunc is None:
        R_trunc = default_R_trunc(geom.l, k_sq)
    model = WaveguideModel.from_geometry(geom, R_trunc, h_max)
    return model.scattering_matrix(k_sq, **kw)


def transmission(S: ScatteringMatrix, m: int = 1) -> tuple[float, float]:
    """Reflection and transmission probabilities ``(R_m, T_m)`` for mode m from the left."""
    M = S.M
    if not 1 <= m <= M:
        raise ScatteringError(f"incident mode {m} outside 1..{M}")
    row = S.s[m - 1]
    R = float(np.sum(np.abs(row[:M]) ** 2))
    T = float(np.sum(np.abs(row[M:]) ** 2))
    return R, T


__all__ = ["ScatteringMatrix", "WaveguideModel", "scattering_matrix", "transmission", "default_R_trunc",
           "RadiationSolutions", "ScatteringError", "threshold"]
