"""Lagrange P1/P2 finite elements on triangle meshes.

Forms are assembled once per mesh and reused: stiffness ``K``, mass ``M``
and one boundary mass ``B[tag]`` per boundary tag.  Dirichlet dofs (all dofs
on DIRICHLET edges) are eliminated; solutions carry zeros there.

Thread-safety contract: :class:`AssembledForms` is immutable after
construction and may be shared freely.  A :class:`Factorization` may also be
shared; its ``solve`` serialises calls on an internal lock because SuperLU
objects give no reentrancy guarantee.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree
from scipy.special import gamma as gamma_fn
from scipy.special import jv

from .geometry import Tag
from .mesh import Mesh


class FemError(RuntimeError):
    pass


# Dunavant degree-4 rule, barycentric points and weights (sum to 1)
_A1, _B1, _W1 = 0.445948490915965, 0.108103018168070, 0.223381589678011
_A2, _B2, _W2 = 0.091576213509771, 0.816847572980459, 0.109951743655322
TRI_QUAD_POINTS = np.array([
    [_A1, _A1, _B1], [_A1, _B1, _A1], [_B1, _A1, _A1],
    [_A2, _A2, _B2], [_A2, _B2, _A2], [_B2, _A2, _A2],
])
TRI_QUAD_WEIGHTS = np.array([_W1] * 3 + [_W2] * 3)

_gl_x, _gl_w = np.polynomial.legendre.leggauss(4)
EDGE_QUAD_POINTS = 0.5 * (_gl_x + 1.0)
EDGE_QUAD_WEIGHTS = 0.5 * _gl_w


def _tri_basis(order: int, lam: np.ndarray):
    """Basis values (n_loc,) and d/dlambda (n_loc, 3) at one barycentric point."""
    l0, l1, l2 = lam
    if order == 1:
        return np.array(lam), np.eye(3)
    val = np.array([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])
    d = np.zeros((6, 3))
    d[0, 0] = 4 * l0 - 1
    d[1, 1] = 4 * l1 - 1
    d[2, 2] = 4 * l2 - 1
    d[3, 0], d[3, 1] = 4 * l1, 4 * l0
    d[4, 1], d[4, 2] = 4 * l2, 4 * l1
    d[5, 2], d[5, 0] = 4 * l0, 4 * l2
    return val, d


def _edge_basis(order: int, t: np.ndarray) -> np.ndarray:
    """Edge trace basis, columns ordered (start, end[, mid])."""
    if order == 1:
        return np.column_stack([1 - t, t])
    return np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])


@dataclass
class FESpace:
    mesh: Mesh
    order: int
    dof_coords: np.ndarray   # (n_dofs, 2)
    elem_dofs: np.ndarray    # (T, 3) or (T, 6)
    bedge_dofs: np.ndarray   # (K, 2) or (K, 3): start, end[, mid]

    @property
    def n_dofs(self) -> int:
        return len(self.dof_coords)


def build_space(mesh: Mesh, order: int = 2) -> FESpace:
    if order not in (1, 2):
        raise FemError(f"element order must be 1 or 2, got {order}")
    t = mesh.triangles
    nn = mesh.n_nodes
    if order == 1:
        return FESpace(mesh, 1, mesh.nodes.copy(), t.copy(), mesh.boundary_edges.copy())
    loc = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)  # (T,3,2)
    flat = np.sort(loc.reshape(-1, 2), axis=1)
    edges, inv = np.unique(flat, axis=0, return_inverse=True)
    inv = inv.reshape(-1, 3)
    mid = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    coords = np.vstack([mesh.nodes, mid])
    elem = np.hstack([t, nn + inv])
    be = np.sort(mesh.boundary_edges, axis=1)
    key = edges[:, 0] * nn + edges[:, 1]
    pos = np.searchsorted(key, be[:, 0] * nn + be[:, 1])
    if np.any(key[np.minimum(pos, len(key) - 1)] != be[:, 0] * nn + be[:, 1]):
        raise FemError("boundary edge not found among element edges")
    bdofs = np.column_stack([mesh.boundary_edges, nn + pos])
    return FESpace(mesh, 2, coords, elem, bdofs)


@dataclass(frozen=True)
class AssembledForms:
    space: FESpace
    K: sp.csr_matrix
    M: sp.csr_matrix
    B: dict
    free: np.ndarray          # indices of free dofs
    dirichlet: np.ndarray     # boolean mask over all dofs

    def restrict(self, A: sp.spmatrix) -> sp.csc_matrix:
        return A[self.free][:, self.free].tocsc()

    def boundary_mass(self, tag: Tag) -> sp.csr_matrix:
        return self.B[int(tag)]


def assemble(mesh: Mesh, element_order: int = 2) -> AssembledForms:
    """Stiffness, mass and per-tag boundary mass matrices."""
    space = build_space(mesh, element_order)
    p = mesh.nodes[mesh.triangles]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    bad = np.flatnonzero(area <= 1e-300)
    if len(bad):
        raise FemError(f"degenerate triangle {int(bad[0])} with area {area[bad[0]]:g}")
    # gradients of barycentric coordinates, (T, 3, 2)
    x, y = p[:, :, 0], p[:, :, 1]
    gl = np.empty((len(p), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        gl[:, i, 0] = (y[:, j] - y[:, k]) / (2 * area)
        gl[:, i, 1] = (x[:, k] - x[:, j]) / (2 * area)

    nloc = space.elem_dofs.shape[1]
    Ke = np.zeros((len(p), nloc, nloc))
    Me = np.zeros((len(p), nloc, nloc))
    for lam, w in zip(TRI_QUAD_POINTS, TRI_QUAD_WEIGHTS):
        val, dval = _tri_basis(element_order, lam)
        grad = np.einsum("ab,tbc->tac", dval, gl)  # (T, nloc, 2)
        Ke += w * area[:, None, None] * np.einsum("tac,tbc->tab", grad, grad)
        Me += w * area[:, None, None] * np.outer(val, val)[None]
    rows = np.repeat(space.elem_dofs, nloc, axis=1).ravel()
    cols = np.tile(space.elem_dofs, (1, nloc)).ravel()
    n = space.n_dofs
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(n, n))

    B = {}
    dofs = space.bedge_dofs
    L = np.linalg.norm(mesh.nodes[mesh.boundary_edges[:, 1]] - mesh.nodes[mesh.boundary_edges[:, 0]], axis=1)
    phi = _edge_basis(element_order, EDGE_QUAD_POINTS)
    ref = np.einsum("q,qa,qb->ab", EDGE_QUAD_WEIGHTS, phi, phi)
    for tag in Tag:
        sel = mesh.edge_tags == int(tag)
        d = dofs[sel]
        nb = d.shape[1]
        vals = (L[sel][:, None, None] * ref[None]).ravel()
        B[int(tag)] = sp.csr_matrix((vals, (np.repeat(d, nb, axis=1).ravel(), np.tile(d, (1, nb)).ravel())),
                                    shape=(n, n))
    dirichlet = np.zeros(n, dtype=bool)
    dirichlet[dofs[mesh.edge_tags == int(Tag.DIRICHLET)].ravel()] = True
    return AssembledForms(space, K, M, B, np.flatnonzero(~dirichlet), dirichlet)


@dataclass
class FemSolution:
    space: FESpace
    values: np.ndarray  # all dofs, zeros on Dirichlet dofs
    k_sq: float | None = None
    params: dict = field(default_factory=dict)


@dataclass
class EigenPair:
    eigenvalue: float
    eigenfunction: FemSolution
    residual: float


def boundary_load(forms: AssembledForms, tag: Tag, g: Callable | complex | None) -> np.ndarray:
    """Vector of ``int_Gamma g * phi_i`` over edges carrying ``tag``."""
    space = forms.space
    mesh = space.mesh
    out = np.zeros(space.n_dofs, dtype=complex)
    if g is None:
        return out
    sel = mesh.edge_tags == int(tag)
    e = mesh.boundary_edges[sel]
    if len(e) == 0:
        raise FemError(f"no boundary edges tagged {Tag(tag).name}")
    a, b = mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]
    L = np.linalg.norm(b - a, axis=1)
    phi = _edge_basis(space.order, EDGE_QUAD_POINTS)  # (q, nb)
    qp = a[:, None, :] + EDGE_QUAD_POINTS[None, :, None] * (b - a)[:, None, :]  # (E, q, 2)
    if callable(g):
        gv = np.asarray(g(qp.reshape(-1, 2)), dtype=complex).reshape(len(e), -1)
    else:
        gv = np.full((len(e), len(EDGE_QUAD_POINTS)), complex(g))
    contrib = np.einsum("eq,q,qa->ea", gv * L[:, None], EDGE_QUAD_WEIGHTS, phi)
    np.add.at(out, space.bedge_dofs[sel], contrib)
    return out


class Factorization:
    """LU factorization of ``K - k^2 M + sum_tag c_tag B_tag`` on free dofs."""

    def __init__(self, forms: AssembledForms, k_sq: float, coeffs: dict, check_condition: bool = True,
                 rcond_min: float = 1e-14):
        self.forms = forms
        self.k_sq = k_sq
        A = forms.K - k_sq * forms.M
        is_real = True
        for tag, c in coeffs.items():
            c = complex(c)
            if c.imag != 0:
                is_real = False
            A = A + (c.real if c.imag == 0 else c) * forms.B[int(tag)]
        self.dtype = float if is_real else complex
        self.A = forms.restrict(A).astype(self.dtype)
        self._lock = threading.Lock()
        self.norm_a = float(spla.norm(self.A, 1))
        try:
            self.lu = spla.splu(self.A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise FemError(f"singular system at k^2={k_sq:.12g}: {exc}; shift k^2 or change the mesh") from exc
        self.rcond = None
        if check_condition:
            self.rcond = self._rcond()
            if not self.rcond > rcond_min:
                raise FemError(f"near-singular system at k^2={k_sq:.12g} (rcond={self.rcond:.3g}); "
                               "shift k^2 or change the mesh")

    def _rcond(self) -> float:
        n = self.A.shape[0]
        inv = spla.LinearOperator((n, n), matvec=lambda v: self.lu.solve(np.asarray(v, dtype=self.dtype)),
                                  rmatvec=lambda v: self.lu.solve(np.asarray(v, dtype=self.dtype), trans="H"),
                                  dtype=self.dtype)
        state = np.random.get_state()
        np.random.seed(0)  # onenormest resamples columns randomly
        try:
            norm_inv = spla.onenormest(inv)
        finally:
            np.random.set_state(state)
        return float(1.0 / (self.norm_a * norm_inv))

    def solve(self, load: np.ndarray) -> np.ndarray:
        """Solve for a full-dof load vector; returns full-dof values."""
        rhs = load[self.forms.free]
        if self.dtype is float:
            if np.any(np.imag(rhs) != 0):
                with self._lock:
                    x = self.lu.solve(np.ascontiguousarray(rhs.real)) + 1j * self.lu.solve(
                        np.ascontiguousarray(rhs.imag))
            else:
                with self._lock:
                    x = self.lu.solve(np.ascontiguousarray(rhs.real))
        else:
            with self._lock:
                x = self.lu.solve(np.ascontiguousarray(rhs, dtype=complex))
        out = np.zeros(self.forms.space.n_dofs, dtype=x.dtype)
        out[self.forms.free] = x
        # normwise backward error
        res = np.linalg.norm(self.A @ x - rhs, 1)
        scale = self.norm_a * np.linalg.norm(x, 1) + np.linalg.norm(rhs, 1)
        if scale > 0 and res > 1e-10 * scale:
            raise FemError(f"linear solve backward error {res / scale:.3g} above tolerance at k^2={self.k_sq:.12g}")
        return out


def solve_robin(forms: AssembledForms, k_sq: float, robin: Sequence, check_condition: bool = True) -> FemSolution:
    """Solve ``Delta u + k^2 u = 0`` with ``d_n u + i*zeta*u = g`` on tagged ends.

    ``robin`` is a list of ``(tag, zeta, g)``; ``g`` is a callable of an
    ``(n, 2)`` point array, a constant, or ``None``.  A purely imaginary
    ``zeta`` gives a real Robin coefficient (Laplace/real problems stay in
    real arithmetic).
    """
    coeffs = {}
    load = np.zeros(forms.space.n_dofs, dtype=complex)
    for tag, zeta, g in robin:
        coeffs[int(tag)] = coeffs.get(int(tag), 0) + 1j * complex(zeta)
        load += boundary_load(forms, tag, g)
    fac = Factorization(forms, k_sq, coeffs, check_condition=check_condition)
    vals = fac.solve(load)
    if fac.dtype is float and np.all(load.imag == 0):
        vals = vals.real
    return FemSolution(forms.space, vals, k_sq, {"robin": [(int(t), complex(z)) for t, z, _ in robin],
                                                 "rcond": fac.rcond})


def solve_eigen(forms: AssembledForms, n_ev: int = 1, shift: float = 0.0, tol: float = 1e-9) -> list[EigenPair]:
    """Dirichlet eigenpairs nearest ``shift`` (smallest for shift 0), ascending."""
    if n_ev < 1:
        raise FemError("n_ev must be at least 1")
    Kf = forms.restrict(forms.K)
    Mf = forms.restrict(forms.M)
    n = Kf.shape[0]
    if n_ev >= n - 1:
        raise FemError(f"requested {n_ev} eigenpairs from a system with {n} free dofs")
    try:
        vals, vecs = spla.eigsh(Kf, k=n_ev, M=Mf, sigma=shift, which="LM", v0=np.ones(n), tol=1e-14,
                                maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        raise FemError(f"eigen solve did not converge: {len(exc.eigenvalues)} of {n_ev} eigenvalues "
                       f"after {20 * n} iterations") from exc
    order = np.argsort(vals)
    out = []
    for i in order:
        v = vecs[:, i]
        v = v / math.sqrt(float(v @ (Mf @ v)))
        # fixed sign: largest-magnitude entry positive
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        lam = float(vals[i])
        res = float(np.linalg.norm(Kf @ v - lam * (Mf @ v)) / np.linalg.norm(Mf @ v))
        if res > tol * max(1.0, lam):
            raise FemError(f"eigenpair {lam:.10g} residual {res:.3g} above tolerance")
        full = np.zeros(forms.space.n_dofs)
        full[forms.free] = v
        out.append(EigenPair(lam, FemSolution(forms.space, full, lam), res))
    return out


def l2_norm_sq(forms: AssembledForms, sol: FemSolution) -> float:
    v = sol.values
    return float(np.real(np.conj(v) @ (forms.M @ v)))


def boundary_l2(forms: AssembledForms, sol: FemSolution, tag: Tag) -> float:
    v = sol.values
    return float(np.sqrt(np.real(np.conj(v) @ (forms.B[int(tag)] @ v))))


class _Locator:
    def __init__(self, space: FESpace):
        m = space.mesh
        self.p = m.nodes[m.triangles]
        self.tree = cKDTree(self.p.mean(axis=1))
        e = self.p - self.p.mean(axis=1, keepdims=True)
        self.reach = float(np.max(np.linalg.norm(e, axis=2)))

    def barycentric(self, idx, pt):
        p = self.p[idx]
        T = np.stack([p[..., 1, :] - p[..., 0, :], p[..., 2, :] - p[..., 0, :]], axis=-1)
        rhs = pt - p[..., 0, :]
        sol = np.linalg.solve(T, rhs[..., None])[..., 0]
        return np.concatenate([1 - sol.sum(axis=-1, keepdims=True), sol], axis=-1)

    def find(self, pts: np.ndarray, tol: float = 1e-10):
        tri = np.full(len(pts), -1)
        lam = np.zeros((len(pts), 3))
        k = min(16, len(self.p))
        _, cand = self.tree.query(pts, k=k)
        cand = np.atleast_2d(cand).reshape(len(pts), k)
        for i, pt in enumerate(pts):
            bc = self.barycentric(cand[i], np.broadcast_to(pt, (k, 2)))
            ok = np.flatnonzero(bc.min(axis=1) >= -tol)
            if len(ok) == 0:
                near = self.tree.query_ball_point(pt, 2 * self.reach)
                if near:
                    near = np.array(sorted(near))
                    bc = self.barycentric(near, np.broadcast_to(pt, (len(near), 2)))
                    ok2 = np.flatnonzero(bc.min(axis=1) >= -tol)
                    if len(ok2):
                        tri[i], lam[i] = near[ok2[0]], bc[ok2[0]]
                continue
            tri[i], lam[i] = cand[i][ok[0]], bc[ok[0]]
        return tri, lam


_locators: dict = {}


def _locator(space: FESpace) -> _Locator:
    key = id(space.mesh)
    loc = _locators.get(key)
    if loc is None or loc.p.shape[0] != len(space.mesh.triangles):
        loc = _Locator(space)
        _locators.clear()
        _locators[key] = loc
    return loc


def evaluate(sol: FemSolution, points) -> np.ndarray:
    """Interpolate a finite-element solution at arbitrary points inside the mesh."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    space = sol.space
    tri, lam = _locator(space).find(pts)
    missing = np.flatnonzero(tri < 0)
    if len(missing):
        raise FemError(f"point {int(missing[0])} at {pts[missing[0]].tolist()} lies outside the mesh")
    dofs = space.elem_dofs[tri]
    vals = sol.values[dofs]
    if space.order == 1:
        return np.einsum("pa,pa->p", vals, lam)
    l0, l1, l2 = lam.T
    basis = np.column_stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                             4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0])
    return np.einsum("pa,pa->p", vals, basis)


# ---------------------------------------------------------------- corner fits

def power_radial(p: float) -> Callable:
    return lambda r: r ** p


def helmholtz_radial(p: float, k: float) -> Callable:
    """``J_p(k r)`` scaled to behave like ``r**p`` as ``r -> 0``."""
    scale = gamma_fn(p + 1.0) * (2.0 / k) ** p
    return lambda r: scale * jv(p, k * r)


def sector_mode(n: int, omega: float, axis: float) -> Callable:
    """Angular Dirichlet mode ``n`` of a sector of opening omega around ``axis``."""
    c = n * math.pi / omega
    if n % 2:
        return lambda phi: np.cos(c * (phi - axis))
    return lambda phi: np.sin(c * (phi - axis))


@dataclass
class CornerFit:
    value: complex
    residual: float
    extra: np.ndarray
    radii: np.ndarray
    angles: np.ndarray


def corner_coefficient(sol: FemSolution, corner, exponent: float, profile: Callable,
                       window: tuple[float, float], n_samples: tuple[int, int] = (5, 7), *,
                       axis: float = 0.0, omega: float = math.pi / 2, radial: Callable | None = None,
                       subtract: Callable | None = None, extra: Sequence[Callable] = (),
                       angle_fraction: float = 0.8, max_residual: float = 1e-3) -> CornerFit:
    """Least-squares fit ``u(r, phi) ~ c * radial(r) * profile(phi)`` near a corner.

    Samples lie on ``n_samples[0]`` geometric radii in ``window`` times
    ``n_samples[1]`` angles spread over ``angle_fraction`` of the sector of
    opening ``omega`` centred on direction ``axis``.  ``radial`` defaults to
    ``r**exponent``; ``subtract(r, phi)`` is removed from the data before
    fitting and ``extra`` holds additional basis functions ``f(r, phi)``
    absorbing higher-order terms.
    """
    r_min, r_max = window
    if not 0 < r_min < r_max:
        raise FemError(f"empty or invalid sampling window [{r_min}, {r_max}]")
    n_r, n_phi = n_samples
    radii = np.geomspace(r_min, r_max, n_r) if n_r > 1 else np.array([r_min])
    half = 0.5 * omega * angle_fraction
    angles = axis + (np.linspace(-half, half, n_phi) if n_phi > 1 else np.zeros(1))
    R, PHI = np.meshgrid(radii, angles, indexing="ij")
    R, PHI = R.ravel(), PHI.ravel()
    pts = np.column_stack([corner[0] + R * np.cos(PHI), corner[1] + R * np.sin(PHI)])
    data = evaluate(sol, pts).astype(complex)
    if subtract is not None:
        data = data - subtract(R, PHI)
    rad = radial if radial is not None else power_radial(exponent)
    prof = profile(PHI)
    if np.any(np.abs(prof) < 1e-12):
        raise FemError("angular profile vanishes on a sampled ray")
    cols = [rad(R) * prof] + [f(R, PHI) for f in extra]
    A = np.column_stack(cols).astype(complex)
    scale = np.linalg.norm(A, axis=0)
    coef, *_ = np.linalg.lstsq(A / scale, data, rcond=None)
    coef = coef / scale
    fit = A @ coef
    denom = np.linalg.norm(data)
    residual = float(np.linalg.norm(fit - data) / denom) if denom > 0 else 0.0
    if residual > max_residual:
        raise FemError(f"window contaminated by higher-order terms (relative residual {residual:.3g})")
    return CornerFit(complex(coef[0]), residual, coef[1:], radii, angles)


@dataclass(frozen=True)
class BoundaryQuadrature:
    """Gauss points on all edges carrying one tag."""

    points: np.ndarray    # (E*q, 2)
    weights: np.ndarray   # (E*q,)
    dofs: np.ndarray      # (E, nb)
    phi: np.ndarray       # (q, nb)

    def trace(self, values: np.ndarray) -> np.ndarray:
        """Finite-element trace at the quadrature points."""
        return np.einsum("ea,qa->eq", values[self.dofs], self.phi).ravel()

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """``int_Gamma u * conj(v)`` for point-value arrays."""
        return complex(np.sum(self.weights * u * np.conj(v)))


def boundary_quadrature(space: FESpace, tag: Tag) -> BoundaryQuadrature:
    mesh = space.mesh
    sel = mesh.edge_tags == int(tag)
    e = mesh.boundary_edges[sel]
    if len(e) == 0:
        raise FemError(f"quadrature requested on untagged boundary {Tag(tag).name}")
    a, b = mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]
    L = np.linalg.norm(b - a, axis=1)
    pts = a[:, None, :] + EDGE_QUAD_POINTS[None, :, None] * (b - a)[:, None, :]
    w = L[:, None] * EDGE_QUAD_WEIGHTS[None, :]
    return BoundaryQuadrature(pts.reshape(-1, 2), w.ravel(), space.bedge_dofs[sel],
                              _edge_basis(space.order, EDGE_QUAD_POINTS))
