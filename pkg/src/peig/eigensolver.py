"""Damped Newton inverse-power iteration for the first p-Laplace eigenpair,
with continuation in p and optional dynamic domain rescaling.

The fixed-p solver repeatedly assembles the linearized system, solves the
shifted equations (K + lambda M) dU = b with preconditioned CG, damps the
update by a quadratic-interpolation line search enforcing sufficient
decrease of the Rayleigh quotient, and renormalizes to sup-norm one.
Continuation warm-starts each p from the previous eigenpair, beginning at
the linear p = 2 problem; the rescaling variant keeps the working
eigenvalue inside [tau_minus, tau_plus] by dilating the domain by factors
of 2^(1/p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fem
from .fem import FeFunction
from .mesh import Mesh, scale_mesh
from .sparse import cg_solve, make_preconditioner, smallest_generalized_eigenpair


class LineSearchError(RuntimeError):
    pass


class NotDescentDirection(LineSearchError):
    pass


@dataclass
class SolverConfig:
    """Tolerances and thresholds for the Newton continuation."""

    eta: float = 1e-5
    tol_newton: float = 1e-7
    tol_cg: float = 1e-6
    c1: float = 1e-3
    delta_p: float = 1.0
    p_max: float = 10.0
    tau_minus: float = 2.0
    tau_plus: float = 20.0
    max_newton_iters: int = 200
    min_delta_p: float = 0.125
    precond: str = "ssor"
    ssor_omega: float = 1.2

    def __post_init__(self):
        if not (self.eta > 0 and self.tol_newton > 0 and self.tol_cg > 0):
            raise ValueError("eta, tol_newton and tol_cg must be positive")
        if not (0.0 < self.c1 < 1.0):
            raise ValueError(f"need 0 < c1 < 1, got {self.c1}")
        if not (0.0 < self.tau_minus < self.tau_plus):
            raise ValueError("need 0 < tau_minus < tau_plus")
        if self.delta_p <= 0:
            raise ValueError("delta_p must be positive")
        if self.p_max < 2.0:
            raise ValueError("p_max must be at least 2")


@dataclass
class EigenResult:
    """One converged (or failed) eigenpair on the working domain."""

    p: float
    lam: float                 # eigenvalue on the working (rescaled) domain
    u: FeFunction              # sup-normalized eigenfunction
    alpha: float = 1.0         # cumulative dilation of the original domain
    lambda_original: float = 0.0  # alpha^p * lam
    newton_iters: int = 0
    converged: bool = True
    fail_reason: str | None = None
    rq_trace: list | None = None  # Rayleigh quotients of the accepted iterates

    def __post_init__(self):
        if self.lambda_original == 0.0:
            self.lambda_original = scaled_back_eigenvalue(self.lam, self.alpha, self.p)


def scaled_back_eigenvalue(lam: float, alpha: float, p: float) -> float:
    """Map a working-domain eigenvalue back to the original domain."""
    if alpha == 1.0:
        return lam
    return math.exp(p * math.log(alpha) + math.log(lam))


@dataclass
class ContinuationRun:
    """All converged results of a continuation sweep, oldest first."""

    results: list
    failure: str | None = None

    def __iter__(self):
        return iter(self.results)

    def __len__(self):
        return len(self.results)


# ---------------------------------------------------------------------------
# line search
# ---------------------------------------------------------------------------

def sufficient_decrease_search(phi, phi0: float, D0: float, c1: float) -> float:
    """Scalar backtracking core: smallest tested beta in (0, 1] satisfying
    phi(beta) <= phi0 + c1 beta D0.

    Starts at beta = 1; a rejected beta is replaced by the minimizer of the
    quadratic interpolant through (phi0, D0, phi(beta)), clamped to
    [0.1 beta, 0.5 beta].  Raises once beta underflows 1e-12.
    """
    if D0 >= 0.0:
        raise NotDescentDirection(f"not a descent direction (R' = {D0:.3e})")
    beta = 1.0
    while True:
        val = phi(beta)
        if val <= phi0 + c1 * beta * D0:
            return beta
        denom = 2.0 * (val - phi0 - D0 * beta)
        beta_q = -D0 * beta * beta / denom if denom > 0 else 0.5 * beta
        beta = min(max(beta_q, 0.1 * beta), 0.5 * beta)
        if beta < 1e-12:
            raise LineSearchError("line search failed (step underflow)")


def line_search(m: Mesh, u: FeFunction, du: FeFunction, p: float, c1: float) -> float:
    """Damping factor for the Newton update by sufficient decrease of R_p.

    Finds beta in (0, 1] with R_p(u + beta du) <= R_p(u) + c1 beta R_p'(u)[du]
    via :func:`sufficient_decrease_search`.
    """
    R0 = fem.rayleigh_quotient(m, u, p)
    D0 = fem.rayleigh_directional_derivative(m, u, du, p)

    def phi(beta):
        trial = FeFunction(m, u.coefficients + beta * du.coefficients)
        return fem.rayleigh_quotient(m, trial, p)

    return sufficient_decrease_search(phi, R0, D0, c1)


# ---------------------------------------------------------------------------
# fixed-p Newton solve
# ---------------------------------------------------------------------------

def newton_solve_fixed_p(m: Mesh, p: float, init: EigenResult, cfg: SolverConfig) -> EigenResult:
    """Damped Newton inverse-power iteration at fixed p.

    Warm-started from ``init`` (typically the eigenpair at the previous
    continuation step).  Iterates assemble / shifted CG solve / line search /
    normalize until the relative l2 change of the coefficients drops below
    cfg.tol_newton.  A failed line search or CG solve returns a result with
    ``converged == False`` and a diagnostic reason.
    """
    u = fem.normalize_sup(FeFunction(m, init.u.coefficients.copy()))
    if np.any(u.coefficients[m.boundary_nodes] != 0.0):
        raise ValueError("initial iterate violates the Dirichlet condition")
    lam = init.lam
    free = m.free_nodes()
    trace = []

    def failed(n_it, reason):
        return EigenResult(
            p, lam, u, alpha=init.alpha, newton_iters=n_it, converged=False,
            fail_reason=reason, rq_trace=trace,
        )

    for n in range(cfg.max_newton_iters):
        K, M, b = fem.assemble_newton_system(m, u, p, cfg.eta, lam)
        A = K.add_scaled(M, lam)  # shifted system stays positive definite
        try:
            precond = make_preconditioner(A, cfg.precond, cfg.ssor_omega)
            d, rep = cg_solve(A, b, tol=cfg.tol_cg, precond=precond)
        except RuntimeError as err:
            return failed(n, f"CG failure: {err}")
        if not rep.converged:
            return failed(
                n, f"CG stalled at relative residual {rep.final_relative_residual:.3e}"
            )
        du = FeFunction(m, np.zeros(m.n_vertices))
        du.coefficients[free] = d

        negligible = np.linalg.norm(d) <= cfg.tol_newton * np.linalg.norm(u.coefficients[free])
        if negligible:
            beta, R0 = 1.0, None
        else:
            R0 = fem.rayleigh_quotient(m, u, p)
            try:
                beta = line_search(m, u, du, p, cfg.c1)
            except LineSearchError as err:
                return failed(n, str(err))

        u_new = fem.normalize_sup(
            FeFunction(m, u.coefficients + beta * du.coefficients)
        )
        rel = float(
            np.linalg.norm(u_new.coefficients - u.coefficients)
            / np.linalg.norm(u_new.coefficients)
        )
        lam_new = fem.rayleigh_quotient(m, u_new, p)
        if R0 is not None:
            assert lam_new <= R0 * (1.0 + 1e-13), "Rayleigh quotient increased"
            if not trace:
                trace.append(R0)
        trace.append(lam_new)
        u, lam = u_new, lam_new
        if rel <= cfg.tol_newton:
            res = EigenResult(
                p, lam, u, alpha=init.alpha, newton_iters=n + 1, rq_trace=trace
            )
            _check_result(res)
            return res
    return failed(cfg.max_newton_iters, "max Newton iterations exceeded")


def _check_result(res: EigenResult):
    assert res.lam > 0.0, "eigenvalue must be positive"
    assert abs(fem.sup_norm(res.u) - 1.0) <= 1e-14, "eigenfunction not sup-normalized"
    assert res.u.coefficients.min() >= -1e-12, "eigenfunction has negative nodal values"


# ---------------------------------------------------------------------------
# p = 2 initialization
# ---------------------------------------------------------------------------

def p2_initialize(m: Mesh, cfg: SolverConfig) -> EigenResult:
    """Seed eigenpair from the linear p = 2 problem (inverse power iteration)."""
    zero = FeFunction(m, np.zeros(m.n_vertices))
    K, M, _ = fem.assemble_newton_system(m, zero, 2.0, cfg.eta, 1.0)
    # floor at 1e-11: the eigen-residual stalls near roundoff below that
    tol = max(min(0.1 * cfg.tol_newton, 1e-8), 1e-11)
    lam, v = smallest_generalized_eigenpair(
        K, M, tol=tol, precond_kind=cfg.precond, omega=cfg.ssor_omega
    )
    u = FeFunction(m, np.zeros(m.n_vertices))
    u.coefficients[m.free_nodes()] = v
    u = fem.normalize_sup(u)
    seed = EigenResult(2.0, lam, u, newton_iters=0)
    polished = newton_solve_fixed_p(m, 2.0, seed, cfg)
    if not polished.converged:
        raise RuntimeError(f"p = 2 initialization failed: {polished.fail_reason}")
    return polished


# ---------------------------------------------------------------------------
# continuation
# ---------------------------------------------------------------------------

def _p_grid_step(p: float, delta: float, p_max: float) -> float:
    return min(p + delta, p_max)


def continuation(m: Mesh, cfg: SolverConfig) -> ContinuationRun:
    """March the eigenpair from p = 2 to cfg.p_max in steps of cfg.delta_p.

    Each solve is warm-started from the previous eigenpair.  When a step
    fails, the continuation step is halved (down to cfg.min_delta_p) and
    the step retried; once the floor is reached the sweep is truncated
    with the failure reason recorded.
    """
    current = p2_initialize(m, cfg)
    results = [current]
    delta = cfg.delta_p
    while current.p < cfg.p_max - 1e-12:
        p_next = _p_grid_step(current.p, delta, cfg.p_max)
        attempt = newton_solve_fixed_p(m, p_next, current, cfg)
        if attempt.converged:
            current = attempt
            results.append(attempt)
            continue
        if delta / 2.0 >= cfg.min_delta_p * (1.0 - 1e-12):
            delta /= 2.0
            continue
        return ContinuationRun(results, failure=f"p = {p_next}: {attempt.fail_reason}")
    return ContinuationRun(results)


def continuation_with_rescaling(m: Mesh, cfg: SolverConfig) -> ContinuationRun:
    """Continuation with adaptive domain rescaling (dynamic thresholding).

    Before each Newton solve the warm-start eigenvalue is compared against
    the thresholds: above tau_plus the domain is dilated by 2^(1/p) and the
    eigenvalue halved, below tau_minus the reverse.  Nodal values transfer
    unchanged (a pure dilation preserves connectivity); reported results
    carry both the working eigenvalue and alpha^p lambda on the original
    domain.
    """
    current = p2_initialize(m, cfg)
    results = [current]
    delta = cfg.delta_p
    alpha = 1.0
    working = m
    while current.p < cfg.p_max - 1e-12:
        p_next = _p_grid_step(current.p, delta, cfg.p_max)
        alpha_next = alpha
        lam0 = current.lam
        if lam0 > cfg.tau_plus:
            alpha_next = alpha * 2.0 ** (1.0 / p_next)
            lam0 = lam0 / 2.0
        if lam0 < cfg.tau_minus:
            alpha_next = alpha * 2.0 ** (-1.0 / p_next)
            lam0 = 2.0 * lam0
        if alpha_next != alpha:
            mesh_next = scale_mesh(m, alpha_next)
        else:
            mesh_next = working
        init = EigenResult(
            current.p, lam0,
            FeFunction(mesh_next, current.u.coefficients.copy()),
            alpha=alpha_next, newton_iters=0,
        )
        attempt = newton_solve_fixed_p(mesh_next, p_next, init, cfg)
        if attempt.converged:
            alpha = alpha_next
            working = mesh_next
            current = attempt
            results.append(attempt)
            continue
        if delta / 2.0 >= cfg.min_delta_p * (1.0 - 1e-12):
            delta /= 2.0
            continue
        return ContinuationRun(results, failure=f"p = {p_next}: {attempt.fail_reason}")
    return ContinuationRun(results)
