"""Epsilon-independent constants of the resonant-tunnelling asymptotics.

All corner coefficients are taken against the flux-normalised angular
profile ``Phi(phi) = cos(pi * phi / omega) / sqrt(pi)``.  With this profile
the corner singular modes carry unit flux, ``Im a = |A|**2`` holds, and the
resonance shift and width formulas of :mod:`rwg.asymptotics` apply without
extra factors.  ``alpha`` and ``beta`` are ratios of coefficients of the
same profile, so they do not depend on this choice.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .fem import (
    FemError,
    assemble,
    boundary_quadrature,
    corner_coefficient,
    helmholtz_radial,
    power_radial,
    sector_mode,
    solve_eigen,
    solve_robin,
)
from .geometry import Tag, WaveguideGeometry, build_halfstrip, build_omega, build_resonator
from .mesh import triangulate
from .modes import mode_basis, threshold

PHI0 = 1.0 / math.sqrt(math.pi)
CONVENTION = "phi0=1/sqrt(pi)"


class ConstantsError(RuntimeError):
    pass


def profile(omega: float, axis: float = 0.0):
    """Flux-normalised corner profile centred on direction ``axis``."""
    c = math.pi / omega
    return lambda phi: PHI0 * np.cos(c * (np.asarray(phi) - axis))


@dataclass
class FemOptions:
    h_max: float = 0.025
    gamma_mesh: float = 0.5
    order: int = 2
    n_samples: tuple = (5, 7)
    # corner window as fractions of the cone-side length
    window: tuple = (0.08, 0.5)
    omega_h_max: float = 0.1
    extra_modes: int = 2

    def refined(self, factor: float = 0.5) -> "FemOptions":
        return FemOptions(self.h_max * factor, self.gamma_mesh, self.order, self.n_samples, self.window,
                          self.omega_h_max * factor, self.extra_modes)


def _helmholtz_extras(omega, axis, k, count):
    """Higher sector modes ``J_{n pi/omega}(k r) mode_n(phi)``, n = 2..count+1."""
    out = []
    for n in range(2, 2 + count):
        rad = helmholtz_radial(n * math.pi / omega, k)
        ang = sector_mode(n, omega, axis)
        out.append(lambda r, phi, rad=rad, ang=ang: rad(r) * ang(phi))
    return out


def _laplace_extras(omega, axis, count, decaying_only=False):
    # the growing principal term absorbs truncation and boundary-chord errors
    lead = sector_mode(1, omega, axis)
    pw1 = math.pi / omega
    out = [lambda r, phi: r ** pw1 * lead(phi)]
    for n in range(2, 2 + count):
        ang = sector_mode(n, omega, axis)
        pw = n * math.pi / omega
        out.append(lambda r, phi, pw=pw, ang=ang: r ** (-pw) * ang(phi))
        if not decaying_only:
            out.append(lambda r, phi, pw=pw, ang=ang: r ** pw * ang(phi))
    return out


@dataclass
class ResonatorResult:
    k0_sq: float
    b1: float
    b2: float
    q: int
    q_raw: float
    gap: float
    fit_residual: float
    eigen_residual: float
    n_dofs: int


def resonator_constants(geom: WaveguideGeometry, opts: FemOptions | None = None) -> ResonatorResult:
    """First Dirichlet eigenpair of the resonator and its corner coefficients."""
    opts = opts or FemOptions()
    b = build_resonator(geom)
    mesh = triangulate(b, opts.h_max, opts.gamma_mesh, r_ref=geom.l)
    forms = assemble(mesh, opts.order)
    pairs = solve_eigen(forms, 2)
    k0_sq = pairs[0].eigenvalue
    lo, hi = threshold(1, geom.l), threshold(2, geom.l)
    if not lo < k0_sq < hi:
        raise ConstantsError(f"resonance outside one-mode window; adjust geometry (k0^2={k0_sq:.6g} "
                             f"not in ({lo:.6g}, {hi:.6g}))")
    gap = pairs[1].eigenvalue - k0_sq
    if gap < 1e-6 * k0_sq:
        raise ConstantsError(f"near-degenerate resonator eigenvalue {k0_sq:.10g}")
    sol = pairs[0].eigenfunction
    side = 0.5 * geom.l / math.sin(0.5 * geom.omega)
    window = (opts.window[0] * side, opts.window[1] * side)
    p = geom.corner_exponent
    k0 = math.sqrt(k0_sq)
    fits = []
    for corner, axis in (((0.0, 0.0), 0.0), ((geom.d, 0.0), math.pi)):
        fits.append(corner_coefficient(
            sol, corner, p, profile(geom.omega, axis), window, opts.n_samples, axis=axis, omega=geom.omega,
            radial=helmholtz_radial(p, k0), extra=_helmholtz_extras(geom.omega, axis, k0, opts.extra_modes)))
    b1, b2 = fits[0].value.real, fits[1].value.real
    if b1 < 0:
        sol.values = -sol.values
        b1, b2 = -b1, -b2
    if b1 == 0:
        raise ConstantsError("corner coefficient b1 vanishes")
    q_raw = b2 / b1
    q = int(np.sign(q_raw))
    return ResonatorResult(k0_sq, b1, b2, q, q_raw, gap, max(f.residual for f in fits), pairs[0].residual,
                           forms.space.n_dofs)


@dataclass
class AmplitudeResult:
    a_bold: complex
    A_abs: float
    reflection: complex
    reflection_defect: float
    phase_mismatch_deg: float
    fit_residual: float
    k_sq: float
    R_trunc: float


def amplitude_constant(geom: WaveguideGeometry, k_sq: float, R_trunc: float | None = None,
                       opts: FemOptions | None = None, reflection_tol: float = 0.02) -> AmplitudeResult:
    """Corner coefficient of the closed-channel solution in the left limit domain.

    ``V`` solves the Helmholtz problem in the left half-strip truncated at
    ``x = -R`` with data ``2 i nu exp(i nu R) Psi_1`` on the artificial end.
    Near the cone vertex ``V ~ a_bold r^p Phi``, and ``|A| = |a_bold| / 2``.
    The far-field reflection ``r`` read off the artificial end must be
    unimodular and equal ``-conj(A)^2 / |A|^2`` with ``conj(A) = a_bold / 2i``:
    ``v = (v_1 - conj(v_1)) / A`` has far field ``exp(-i nu x) - (conj(A) / A) exp(i nu x)``.
    """
    opts = opts or FemOptions()
    basis = mode_basis(geom.l, k_sq)
    if basis.M != 1:
        raise ConstantsError(f"k^2={k_sq:g} outside the one-mode window")
    nu = float(basis.nus[0])
    if R_trunc is None:
        R_trunc = max(3.0 * geom.l, math.log(1e8) / basis.delta)
    b = build_halfstrip(geom, R_trunc)
    mesh = triangulate(b, opts.h_max, opts.gamma_mesh, r_ref=geom.l)
    forms = assemble(mesh, opts.order)
    g = lambda pts: 2j * nu * np.exp(1j * nu * R_trunc) * basis.psi(1, pts[:, 1])
    sol = solve_robin(forms, k_sq, [(Tag.GAMMA_1, nu, g)])

    p = geom.corner_exponent
    side = 0.5 * geom.l / math.sin(0.5 * geom.omega)
    window = (opts.window[0] * side, opts.window[1] * side)
    k = math.sqrt(k_sq)
    fit = corner_coefficient(sol, (0.0, 0.0), p, profile(geom.omega, math.pi), window, opts.n_samples,
                             axis=math.pi, omega=geom.omega, radial=helmholtz_radial(p, k),
                             extra=_helmholtz_extras(geom.omega, math.pi, k, opts.extra_modes))
    a_bold = fit.value
    A_bar = a_bold / 2j
    A_abs = abs(a_bold) / 2

    quad = boundary_quadrature(forms.space, Tag.GAMMA_1)
    proj = nu * quad.inner(quad.trace(sol.values), basis.psi(1, quad.points[:, 1]))
    r = (proj - np.exp(1j * nu * R_trunc)) * np.exp(1j * nu * R_trunc)
    defect = abs(abs(r) - 1.0)
    if defect > reflection_tol:
        raise ConstantsError(f"|r|={abs(r):.5f} deviates from 1: truncation or mesh too coarse")
    predicted = -A_bar ** 2 / abs(A_bar) ** 2
    mismatch = abs(np.degrees(np.angle(r / predicted)))
    return AmplitudeResult(complex(a_bold), float(A_abs), complex(r), float(defect), float(mismatch),
                           fit.residual, float(k_sq), float(R_trunc))


@dataclass
class NarrowResult:
    alpha: float
    beta: float
    R_list: list
    alpha_by_R: list
    beta_by_R: list
    alpha_deltas: list
    beta_deltas: list
    fit_residual: float


def _solve_narrow(r0, omega, R, opts: FemOptions, single_sector: bool):
    p = math.pi / omega
    b = build_omega(r0, omega, R, opts.omega_h_max, single_sector=single_sector)
    mesh = triangulate(b, opts.omega_h_max, opts.gamma_mesh, r_ref=max(r0, 1.0),
                       extra_corners=[(0.0, 0.0)], h_min=opts.omega_h_max / 200)
    forms = assemble(mesh, opts.order)
    prof = profile(omega, 0.0)
    g = lambda pts: 2 * p * R ** (p - 1) * prof(np.arctan2(pts[:, 1], pts[:, 0]))
    # real Robin coefficient p/R written as i*zeta with zeta = -i p/R
    robin = [(Tag.GAMMA_2, -1j * p / R, g)]
    if not single_sector:
        robin.append((Tag.GAMMA_1, -1j * p / R, None))
    return solve_robin(forms, 0.0, robin)


def narrow_constants(r0: float, omega: float, R_list=(4.0, 6.0, 8.0), opts: FemOptions | None = None,
                     single_sector: bool = False, window=None, noise_floor: float = 1e-7) -> NarrowResult:
    """``alpha`` and ``beta`` of the harmonic narrow solution from truncated Laplace-Robin solves.

    For every ``R`` the truncated solution ``W`` is fitted on an annulus:
    on the right sector ``W - rho^p Phi ~ alpha rho^-p Phi``, on the left
    ``W ~ beta rho^-p Phi(pi - phi)``; higher sector modes are fitted
    alongside.  The reported values are extrapolated assuming the
    ``R^(-3p)`` truncation rate.
    """
    opts = opts or FemOptions()
    R_list = sorted(float(R) for R in R_list)
    if not R_list:
        raise ConstantsError("R_list must not be empty")
    p = math.pi / omega
    if window is None:
        window = (1.0, 3.0) if single_sector else (1.5 * r0, 4.0 * r0)
    if window[1] >= R_list[0]:
        raise ConstantsError(f"fit window {window} reaches the truncation radius {R_list[0]}")
    alphas, betas, residuals = [], [], []
    prof_r = profile(omega, 0.0)
    for R in R_list:
        W = _solve_narrow(r0, omega, R, opts, single_sector)
        fa = corner_coefficient(W, (0.0, 0.0), -p, prof_r, window, (7, 9), axis=0.0, omega=omega,
                                subtract=lambda r, phi: r ** p * prof_r(phi),
                                extra=_laplace_extras(omega, 0.0, opts.extra_modes), max_residual=1e-2)
        alphas.append(fa.value.real)
        residuals.append(fa.residual)
        if single_sector:
            betas.append(float("nan"))
            continue
        fb = corner_coefficient(W, (0.0, 0.0), -p, profile(omega, math.pi), window, (7, 9), axis=math.pi,
                                omega=omega, extra=_laplace_extras(omega, math.pi, opts.extra_modes),
                                max_residual=1e-2)
        betas.append(fb.value.real)
        residuals.append(fb.residual)

    def deltas(vals):
        return [abs(b - a) for a, b in zip(vals, vals[1:])]

    da, db = deltas(alphas), deltas(betas)
    for name, ds, vals in (("alpha", da, alphas), ("beta", db, betas)):
        if single_sector and name == "beta":
            continue
        scale = max(abs(v) for v in vals) or 1.0
        for a, b in zip(ds, ds[1:]):
            if b > a and b > noise_floor * scale:
                raise ConstantsError(f"narrow-domain truncation not converged: {name} deltas {ds}")

    def extrapolate(vals):
        if len(vals) < 2:
            return vals[-1]
        w1, w2 = R_list[-2] ** (3 * p), R_list[-1] ** (3 * p)
        return (w2 * vals[-1] - w1 * vals[-2]) / (w2 - w1)

    alpha = extrapolate(alphas)
    beta = float("nan") if single_sector else extrapolate(betas)
    return NarrowResult(float(alpha), float(beta), R_list, alphas, betas, da, db, max(residuals))


@dataclass
class TunnelingConstants:
    k0_sq: float
    b1: float
    q: int
    A_abs: float
    a_bold: complex
    alpha: float
    beta: float
    P: float
    omega: float
    diagnostics: dict = field(default_factory=dict)
    geometry: dict = field(default_factory=dict)
    convention: str = CONVENTION

    def to_json(self) -> str:
        d = asdict(self)
        d["a_bold"] = {"re": self.a_bold.real, "im": self.a_bold.imag}
        return json.dumps(d, indent=2, sort_keys=True, default=_json_default) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TunnelingConstants":
        d = json.loads(text)
        d["a_bold"] = complex(d["a_bold"]["re"], d["a_bold"]["im"])
        return cls(**d)


def _json_default(o):
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def assemble_constants(k0_sq: float, b1: float, q_raw: float, A_abs: float, alpha: float, beta: float,
                       omega: float = math.pi / 2, a_bold: complex | None = None, diagnostics=None,
                       geometry=None, l: float | None = None, q_tol: float = 0.02) -> TunnelingConstants:
    """Validate sub-results and compute ``P = 1 / (2 b1^2 beta^2 |A|^2)``."""
    problems = []
    if l is not None and not threshold(1, l) < k0_sq < threshold(2, l):
        problems.append(f"k0^2={k0_sq:g} outside the one-mode window")
    if b1 == 0 or not math.isfinite(b1):
        problems.append("b1 must be nonzero")
    if beta == 0 or not math.isfinite(beta):
        problems.append("beta must be nonzero")
    if not math.isfinite(alpha):
        problems.append("alpha must be finite")
    if abs(abs(q_raw) - 1.0) > q_tol:
        problems.append(f"|b2/b1|={abs(q_raw):.4f} deviates from 1 by more than {q_tol:.0%} (mesh suspect)")
    if not A_abs > 0:
        problems.append("|A| must be positive")
    if a_bold is not None and abs(abs(a_bold) / 2 - A_abs) > 1e-12 * max(1.0, A_abs):
        problems.append("A_abs inconsistent with a_bold")
    if problems:
        raise ConstantsError("; ".join(problems))
    P = 1.0 / (2.0 * b1 ** 2 * beta ** 2 * A_abs ** 2)
    q = 1 if q_raw > 0 else -1
    return TunnelingConstants(float(k0_sq), float(b1), q, float(A_abs),
                              complex(a_bold if a_bold is not None else 2j * A_abs), float(alpha), float(beta),
                              float(P), float(omega), dict(diagnostics or {}), dict(geometry or {}))


def compute_constants(geom: WaveguideGeometry, opts: FemOptions | None = None, R_list=(4.0, 6.0, 8.0),
                      mesh_check: bool = False) -> TunnelingConstants:
    """Run the three limit problems and bundle the constants with diagnostics."""
    opts = opts or FemOptions()
    res = resonator_constants(geom, opts)
    amp = amplitude_constant(geom, res.k0_sq, opts=opts)
    nar = narrow_constants(geom.r0, geom.omega, R_list, opts)
    diag = {
        "k0_gap": res.gap,
        "eigen_residual": res.eigen_residual,
        "b2": res.b2,
        "q_raw": res.q_raw,
        "fit_residual_b": res.fit_residual,
        "fit_residual_a": amp.fit_residual,
        "fit_residual_narrow": nar.fit_residual,
        "reflection": {"re": amp.reflection.real, "im": amp.reflection.imag},
        "reflection_defect": amp.reflection_defect,
        "amplitude_phase_mismatch_deg": amp.phase_mismatch_deg,
        "amplitude_R_trunc": amp.R_trunc,
        "R_list": nar.R_list,
        "alpha_by_R": nar.alpha_by_R,
        "beta_by_R": nar.beta_by_R,
        "alpha_R_deltas": nar.alpha_deltas,
        "beta_R_deltas": nar.beta_deltas,
        "h_max": opts.h_max,
        "omega_h_max": opts.omega_h_max,
        "element_order": opts.order,
    }
    if mesh_check:
        fine = opts.refined()
        r2 = resonator_constants(geom, fine)
        a2 = amplitude_constant(geom, r2.k0_sq, opts=fine)
        n2 = narrow_constants(geom.r0, geom.omega, R_list, fine)
        diag["mesh_deltas"] = {
            "k0_sq": abs(r2.k0_sq - res.k0_sq) / res.k0_sq,
            "b1": abs(r2.b1 - res.b1) / abs(res.b1),
            "A_abs": abs(a2.A_abs - amp.A_abs) / amp.A_abs,
            "alpha": abs(n2.alpha - nar.alpha) / max(abs(nar.alpha), 1e-300),
            "beta": abs(n2.beta - nar.beta) / abs(nar.beta),
        }
    geometry = {"l": geom.l, "omega": geom.omega, "d": geom.d, "r0": geom.r0}
    return assemble_constants(res.k0_sq, res.b1, res.q_raw, amp.A_abs, nar.alpha, nar.beta, geom.omega,
                              amp.a_bold, diag, geometry, l=geom.l)
