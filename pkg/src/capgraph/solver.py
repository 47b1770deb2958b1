"""Finite-volume solver for div(Du/W) = H with contact-angle wall condition.

The discretization is variational: the discrete capillary energy (cell
quadrature of v over corner gradients, see capillary.quadrant_gradients)
plus a weighted source term is differentiated exactly, and the residual is
the scaled energy gradient.  Consequences used throughout the tests:

* the affine capillary family is annihilated to machine precision,
* the wall condition enters as the natural flux -cos(theta) at the wall
  face (no nonlinear per-node solve; the closed-form ghost closure is
  equivalent and is used for reported nodal gradients),
* at theta = pi/2 and u = 0 the Jacobian rows reduce to the standard
  Laplacian stencil scaled by 1/h^2,
* a converged solution is a discrete stationary point of the energy.

Newton iterations are damped by backtracking on the residual norm, and the
linear systems are solved by handwritten Jacobi-preconditioned Krylov loops
(CG for the symmetric form, BiCGSTAB otherwise) with fixed reduction order,
so repeated runs are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .capillary import (CapillaryAngle, GradientField, ScalarField,
                        affine_capillary_solution, capillary_area_element,
                        capillary_energy, quadrant_gradients)
from .errors import InvariantViolation, LinearSolveFailure, ShapeMismatch
from .geometry import EllipsoidRegion, HalfSpaceGrid, inner_node_set


class SolveStatus(Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class SolverConfig:
    tol_residual: float = 1e-10      # relative infinity-norm target
    max_newton: int = 50
    damping: float = 0.5             # backtracking factor
    min_step: float = 1e-6
    linear_tol: float = 1e-12        # relative 2-norm target of inner solves
    linear_max_iter: int = 20000

    def __post_init__(self):
        if not (0.0 < self.damping < 1.0):
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        for name in ("tol_residual", "min_step", "linear_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Problem data: grid, contact angle, curvature source, Dirichlet values.

    `H` is a constant or a callable on an (N, dim) array of points; `C_H`
    optionally records the bound |H| + |DH| <= C_H of the data family (it is
    reported, not enforced).  `dirichlet` is aligned with
    grid.dirichlet_indices.
    """

    grid: HalfSpaceGrid
    theta: CapillaryAngle
    dirichlet: np.ndarray
    H: object = 0.0
    C_H: float | None = None
    initial: ScalarField | None = None

    def __post_init__(self):
        vals = np.asarray(self.dirichlet, dtype=float)
        need = self.grid.dirichlet_indices.size
        if vals.shape != (need,):
            raise ShapeMismatch(
                f"dirichlet must cover exactly the {need} Dirichlet nodes, "
                f"got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("dirichlet values must be finite")
        object.__setattr__(self, "dirichlet", vals.copy())
        if not callable(self.H) and not np.isfinite(float(self.H)):
            raise ValueError("H must be finite")

    @classmethod
    def from_boundary_data(cls, grid, theta, data, H=0.0, C_H=None, initial=None):
        """Build a spec from a callable (or array) of Dirichlet data."""
        if callable(data):
            vals = np.asarray(data(grid.nodes[grid.dirichlet_indices]), dtype=float)
        else:
            vals = np.asarray(data, dtype=float)
        return cls(grid=grid, theta=theta, dirichlet=vals, H=H, C_H=C_H,
                   initial=initial)

    def source_at_nodes(self) -> np.ndarray:
        if callable(self.H):
            return np.asarray(self.H(self.grid.nodes), dtype=float)
        return np.full(self.grid.n_nodes, float(self.H))

    def impose(self, values: np.ndarray) -> np.ndarray:
        out = np.array(values, dtype=float)
        out[self.grid.dirichlet_indices] = self.dirichlet
        return out


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Row-compressed linear system with a symmetry tag for solver dispatch."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        m = self.matrix.tocsr()
        m.eliminate_zeros()
        if m.shape[0] != m.shape[1] or m.shape[0] != self.rhs.shape[0]:
            raise ShapeMismatch(
                f"system shape {m.shape} does not match rhs {self.rhs.shape}"
            )
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual_history: tuple[float, ...]
    final_residual: float
    sup_grad_inner: dict
    v_min: float
    energy: float
    status: SolveStatus


def ghost_closure(tangential_grad, theta: CapillaryAngle) -> float:
    """Wall-normal slope u_1 = -cot(theta) sqrt(1 + |s|^2) closing a boundary
    stencil; the unique root of the contact-angle condition given the
    tangential gradient s (empty in 1D)."""
    s = np.asarray(tangential_grad, dtype=float).ravel()
    return float(-theta.cot_t * np.sqrt(1.0 + s @ s))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _energy_gradient(grid: HalfSpaceGrid, values: np.ndarray,
                     theta: CapillaryAngle) -> tuple[np.ndarray, float]:
    """Exact gradient of the discrete capillary energy, plus min quadrant v."""
    n = grid.n_nodes
    c = grid.cell_corners
    h = grid.h
    g = quadrant_gradients(grid, values)
    w = np.sqrt(1.0 + np.sum(g * g, axis=2))
    v_min = float(np.min(w + theta.cos_t * g[:, :, 0]))
    if grid.dim == 1:
        f = g[:, 0, 0] / w[:, 0] + theta.cos_t
        grad = np.bincount(c[:, 1], f, minlength=n) - np.bincount(c[:, 0], f, minlength=n)
        return grad, v_min
    f1 = g[..., 0] / w + theta.cos_t
    f2 = g[..., 1] / w
    q = h / 4.0
    coef_b = q * (f1[:, 0] + f1[:, 1])
    coef_t = q * (f1[:, 2] + f1[:, 3])
    coef_l = q * (f2[:, 0] + f2[:, 2])
    coef_r = q * (f2[:, 1] + f2[:, 3])
    grad = (np.bincount(c[:, 1], coef_b, minlength=n)
            - np.bincount(c[:, 0], coef_b, minlength=n)
            + np.bincount(c[:, 3], coef_t, minlength=n)
            - np.bincount(c[:, 2], coef_t, minlength=n)
            + np.bincount(c[:, 2], coef_l, minlength=n)
            - np.bincount(c[:, 0], coef_l, minlength=n)
            + np.bincount(c[:, 3], coef_r, minlength=n)
            - np.bincount(c[:, 1], coef_r, minlength=n))
    return grad, v_min


def _energy_hessian(grid: HalfSpaceGrid, values: np.ndarray,
                    theta: CapillaryAngle) -> sp.csr_matrix:
    """Exact (symmetric positive semidefinite) Hessian of the discrete energy."""
    n = grid.n_nodes
    c = grid.cell_corners
    g = quadrant_gradients(grid, values)
    w3 = (1.0 + np.sum(g * g, axis=2)) ** 1.5
    if grid.dim == 1:
        k = 1.0 / (w3[:, 0] * grid.h)
        left, right = c[:, 0], c[:, 1]
        rows = np.concatenate([left, right, left, right])
        cols = np.concatenate([left, right, right, left])
        vals = np.concatenate([k, k, -k, -k])
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    # quadrant q: x-difference nodes (xp, xm), y-difference nodes (yp, ym)
    quad_nodes = (
        (c[:, 1], c[:, 0], c[:, 2], c[:, 0]),
        (c[:, 1], c[:, 0], c[:, 3], c[:, 1]),
        (c[:, 3], c[:, 2], c[:, 2], c[:, 0]),
        (c[:, 3], c[:, 2], c[:, 3], c[:, 1]),
    )
    rows_list, cols_list, vals_list = [], [], []
    for q, (xp, xm, yp, ym) in enumerate(quad_nodes):
        g1, g2 = g[:, q, 0], g[:, q, 1]
        k11 = (1.0 + g2 * g2) / w3[:, q] / 4.0
        k22 = (1.0 + g1 * g1) / w3[:, q] / 4.0
        k12 = -(g1 * g2) / w3[:, q] / 4.0
        rows_list += [xp, xm, xp, xm, yp, ym, yp, ym,
                      xp, xp, xm, xm, yp, ym, yp, ym]
        cols_list += [xp, xm, xm, xp, yp, ym, ym, yp,
                      yp, ym, yp, ym, xp, xp, xm, xm]
        vals_list += [k11, k11, -k11, -k11, k22, k22, -k22, -k22,
                      k12, -k12, -k12, k12, k12, -k12, -k12, k12]
    rows = np.concatenate(rows_list)
    cols = np.concatenate(cols_list)
    vals = np.concatenate(vals_list)
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _check_field(u: ScalarField, spec: ProblemSpec) -> None:
    if u.grid is not spec.grid and u.grid.shape != spec.grid.shape:
        raise ShapeMismatch("field grid does not match problem grid")


def _residual_full(values: np.ndarray, spec: ProblemSpec) -> tuple[np.ndarray, float]:
    grad, v_min = _energy_gradient(spec.grid, values, spec.theta)
    res = -grad / spec.grid.node_weights - spec.source_at_nodes()
    return res, v_min


def assemble_residual(u: ScalarField, spec: ProblemSpec) -> np.ndarray:
    """Discrete div(Du/W) - H over the non-Dirichlet nodes.

    Interior rows are sums of face fluxes over the control volume divided by
    its measure; capillary rows carry the exact wall flux -cos(theta).
    Dirichlet values are assumed already imposed on u.
    """
    _check_field(u, spec)
    res, _ = _residual_full(u.values, spec)
    return res[spec.grid.free_indices]


def assemble_jacobian(u: ScalarField, spec: ProblemSpec) -> SparseSystem:
    """Exact derivative of the discrete residual, with rhs = -residual.

    The matrix is the energy Hessian restricted to free nodes, row-scaled by
    the control volumes (hence not symmetric as stored; newton_solve undoes
    the scaling to solve a symmetric positive definite system instead).
    """
    _check_field(u, spec)
    grid = spec.grid
    free = grid.free_indices
    res, _ = _residual_full(u.values, spec)
    hess = _energy_hessian(grid, u.values, spec.theta)
    hess_ff = hess[free][:, free].tocsr()
    scale = sp.diags(-1.0 / grid.node_weights[free])
    jac = (scale @ hess_ff).tocsr()
    return SparseSystem(matrix=jac, rhs=-res[free], symmetric=False)


# ---------------------------------------------------------------------------
# Linear solves
# ---------------------------------------------------------------------------

def _jacobi(matrix: sp.csr_matrix) -> np.ndarray:
    d = np.abs(matrix.diagonal())
    d[d == 0.0] = 1.0
    return 1.0 / d


def _pcg(a: sp.csr_matrix, b: np.ndarray, tol_abs: float, max_iter: int) -> np.ndarray:
    m = _jacobi(a)
    x = np.zeros_like(b)
    r = b.copy()
    z = m * r
    p = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        ap = a @ p
        pap = p @ ap
        if not np.isfinite(pap) or pap <= 0.0:
            raise LinearSolveFailure("conjugate gradient breakdown (matrix not SPD?)")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= tol_abs:
            return x
        z = m * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise LinearSolveFailure(f"conjugate gradient stagnated after {max_iter} iterations")


def _bicgstab(a: sp.csr_matrix, b: np.ndarray, tol_abs: float, max_iter: int) -> np.ndarray:
    m = _jacobi(a)
    x = np.zeros_like(b)
    r = b.copy()
    r0 = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    for _ in range(max_iter):
        rho_new = r0 @ r
        if abs(rho_new) < 1e-300 or omega == 0.0:
            raise LinearSolveFailure("BiCGSTAB breakdown")
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        ph = m * p
        v = a @ ph
        denom = r0 @ v
        if denom == 0.0:
            raise LinearSolveFailure("BiCGSTAB breakdown")
        alpha = rho_new / denom
        s = r - alpha * v
        if np.linalg.norm(s) <= tol_abs:
            return x + alpha * ph
        sh = m * s
        t = a @ sh
        tt = t @ t
        if tt == 0.0:
            raise LinearSolveFailure("BiCGSTAB breakdown")
        omega = (t @ s) / tt
        x = x + alpha * ph + omega * sh
        r = s - omega * t
        if np.linalg.norm(r) <= tol_abs:
            return x
        rho = rho_new
    raise LinearSolveFailure(f"BiCGSTAB stagnated after {max_iter} iterations")


def linear_solve(system: SparseSystem, cfg: SolverConfig | None = None) -> np.ndarray:
    """Solve the assembled system to relative tolerance cfg.linear_tol.

    Jacobi-preconditioned CG for symmetric systems, Jacobi-preconditioned
    BiCGSTAB otherwise; deterministic for identical inputs.
    """
    cfg = cfg or SolverConfig()
    b = system.rhs
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    tol_abs = cfg.linear_tol * bnorm
    if system.symmetric:
        return _pcg(system.matrix, b, tol_abs, cfg.linear_max_iter)
    return _bicgstab(system.matrix, b, tol_abs, cfg.linear_max_iter)


# ---------------------------------------------------------------------------
# Nodal gradients and the Newton driver
# ---------------------------------------------------------------------------

def discrete_gradient(u: ScalarField, theta: CapillaryAngle) -> GradientField:
    """Nodal gradient: centered second-order differences inside, one-sided
    second-order on the box faces, and the ghost closure for the wall-normal
    component at capillary nodes."""
    grid = u.grid
    lat = u.lattice()
    order0 = 2 if grid.shape[0] >= 3 else 1
    if grid.dim == 1:
        d1 = np.gradient(lat, grid.h, edge_order=order0)
        vec = d1[:, None].copy()
        vec[grid.capillary_indices, 0] = ghost_closure((), theta)
    else:
        order1 = 2 if grid.shape[1] >= 3 else 1
        d1 = np.gradient(lat, grid.h, axis=0, edge_order=order0)
        d2 = np.gradient(lat, grid.h, axis=1, edge_order=order1)
        vec = np.stack([d1.ravel(), d2.ravel()], axis=1)
        cap = grid.capillary_indices
        tang = vec[cap, 1]
        vec[cap, 0] = -theta.cot_t * np.sqrt(1.0 + tang * tang)
    return GradientField(grid, vec,
                         scheme="centered-2 / one-sided-2 faces / ghost-closure wall")


def _affine_initial(spec: ProblemSpec) -> np.ndarray:
    """Slope-matched affine capillary start from the Dirichlet data; zero
    field when the fit is degenerate.

    The tangential slope comes from an unrestricted affine fit, the wall
    slope from the contact angle, and the offset is refit afterwards so the
    start matches the data in the mean (a raw offset fit can leave an O(1)
    jump at Dirichlet nodes that stalls Newton)."""
    grid = spec.grid
    pts = grid.nodes[grid.dirichlet_indices]
    vals = spec.dirichlet
    if vals.size == 0:
        return np.zeros(grid.n_nodes)
    bprime = np.zeros(grid.dim - 1)
    if vals.size > grid.dim:
        design = np.hstack([pts, np.ones((pts.shape[0], 1))])
        coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
        if np.all(np.isfinite(coef)):
            bprime = coef[1:grid.dim]
    fit = affine_capillary_solution(spec.theta, bprime, 0.0)
    offset = float(np.mean(vals - pts @ fit.slope))
    if not np.isfinite(offset):
        return np.zeros(grid.n_nodes)
    return fit.on_grid(grid).values + offset


def newton_solve(spec: ProblemSpec, cfg: SolverConfig | None = None,
                 inner_regions: tuple[EllipsoidRegion, ...] = (),
                 ) -> tuple[ScalarField, SolveReport]:
    """Damped Newton iteration on the discrete problem.

    Converged means the residual infinity norm fell below
    tol_residual * max(1, initial residual).  Steps are accepted only when
    they decrease the residual norm; each Newton system is solved in its
    symmetric positive definite (volume-weighted) form by CG.
    """
    cfg = cfg or SolverConfig()
    grid = spec.grid
    free = grid.free_indices
    weights_f = grid.node_weights[free]

    if spec.initial is not None:
        values = spec.initial.values.copy()
    else:
        values = _affine_initial(spec)
    values = spec.impose(values)

    def residual(vals):
        res, v_min = _residual_full(vals, spec)
        res_f = res[free]
        return res_f, float(np.max(np.abs(res_f))), v_min

    res_f, res_norm, v_min = residual(values)
    if v_min < spec.theta.sin_t - 1e-12:
        raise InvariantViolation("capillary area element fell below sin(theta)")
    res0 = res_norm
    target = cfg.tol_residual * max(1.0, res0)
    history = [res_norm]
    iterations = 0
    status = SolveStatus.MAX_ITER

    for _ in range(cfg.max_newton):
        if res_norm <= target:
            break
        if res_norm > 1e6 * max(1.0, res0):
            status = SolveStatus.DIVERGED
            break
        hess = _energy_hessian(grid, values, spec.theta)
        hess_ff = hess[free][:, free].tocsr()
        system = SparseSystem(matrix=hess_ff, rhs=weights_f * res_f, symmetric=True)
        step = linear_solve(system, cfg)
        # cap runaway directions from near-degenerate (steep-gradient) states
        step_cap = 1e3 * max(1.0, float(np.max(np.abs(values))))
        step_norm = float(np.max(np.abs(step)))
        if step_norm > step_cap:
            step *= step_cap / step_norm

        alpha = 1.0
        accepted = False
        while alpha >= cfg.min_step:
            trial = values.copy()
            trial[free] += alpha * step
            trial_res_f, trial_norm, trial_v_min = residual(trial)
            if trial_norm < (1.0 - 1e-4 * alpha) * res_norm:
                accepted = True
                break
            alpha *= cfg.damping
        if not accepted:
            break
        values = trial
        res_f, res_norm, v_min = trial_res_f, trial_norm, trial_v_min
        if v_min < spec.theta.sin_t - 1e-12:
            raise InvariantViolation("capillary area element fell below sin(theta)")
        history.append(res_norm)
        iterations += 1

    if res_norm <= target and status is not SolveStatus.DIVERGED:
        status = SolveStatus.CONVERGED

    solution = ScalarField(grid, values)
    grad = discrete_gradient(solution, spec.theta)
    v_nodal = capillary_area_element(grad.vectors, spec.theta)
    sup_inner = {}
    for region in inner_regions:
        idx = inner_node_set(grid, region)
        sup_inner[region] = float(np.max(np.linalg.norm(grad.vectors[idx], axis=1)))
    report = SolveReport(
        iterations=iterations,
        residual_history=tuple(history),
        final_residual=res_norm,
        sup_grad_inner=sup_inner,
        v_min=float(np.min(v_nodal)),
        energy=capillary_energy(solution, spec.theta),
        status=status,
    )
    return solution, report
