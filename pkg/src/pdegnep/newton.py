"""Damped semismooth Newton driver with an escalating damping ladder.

The first attempt runs undamped with 25 iterations. Whenever an attempt
misses the tolerances, the damping factor is halved, the iteration cap is
doubled and Newton restarts from the same initial value. A
:class:`DampingPolicy` remembers the last successful stage, so a path driver
that reuses one policy keeps the escalated settings for later solves.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .exceptions import NewtonFailure

ATOL = 1e-10
RTOL = 1e-10
INITIAL_DAMPING = 1.0
INITIAL_MAX_ITER = 25
MIN_DAMPING = 1.0 / 64.0


@dataclass
class NewtonReport:
    iterations: int
    abs_residual: float
    rel_residual: float
    damping: float
    max_iter: int
    converged: bool
    escalations: int = 0
    residuals: list = field(default_factory=list)


def escalate_damping(damping, max_iter):
    """Next rung of the ladder: half the damping, twice the iterations."""
    return damping / 2.0, 2 * max_iter


@dataclass
class DampingPolicy:
    damping: float = INITIAL_DAMPING
    max_iter: int = INITIAL_MAX_ITER
    min_damping: float = MIN_DAMPING

    def escalate(self):
        self.damping, self.max_iter = escalate_damping(self.damping, self.max_iter)
        return self.damping, self.max_iter

    @property
    def exhausted(self):
        return self.damping < self.min_damping


def sparse_lu_solve(J, rhs, perm=None):
    """Solve ``J x = rhs`` by sparse LU; returns ``None`` on breakdown.

    The Jacobians here are structurally symmetric with a nonzero diagonal, so
    SuperLU runs in symmetric mode without pivoting. ``perm`` is a fill-reducing
    symmetric ordering; without it SuperLU's minimum-degree ordering is used.
    One step of iterative refinement follows.
    """
    J = J.tocsc()
    if perm is not None:
        Jp = J[perm][:, perm].tocsc()
        permc = "NATURAL"
    else:
        Jp = J
        permc = "MMD_AT_PLUS_A"
    b = rhs if perm is None else rhs[perm]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", spla.MatrixRankWarning)
        try:
            lu = spla.splu(Jp, permc_spec=permc, diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
        except RuntimeError:
            return None
        x = lu.solve(b)
        x += lu.solve(b - Jp @ x)
    if not np.all(np.isfinite(x)):
        return None
    if perm is None:
        return x
    out = np.empty_like(x)
    out[perm] = x
    return out


def newton_attempt(residual, jacobian, z0, *, damping, max_iter, atol=ATOL, rtol=RTOL,
                   ref_norm=None, linear_solver=sparse_lu_solve):
    """One damped Newton run of at most ``max_iter`` steps.

    The relative residual is ``||F(z)|| / max(||F(z0)||, ref_norm)``.
    """
    z = np.array(z0, dtype=float)
    F = residual(z)
    r = float(np.linalg.norm(F))
    ref = max(r, ref_norm or 0.0)
    history = [r]

    def done(r):
        rel = r / ref if ref > 0 else 0.0
        return r <= atol and rel <= rtol

    k = 0
    while not done(r):
        if k == max_iter or not np.isfinite(r):
            break
        dz = linear_solver(jacobian(z), -F)
        if dz is None:
            break
        z = z + damping * dz
        F = residual(z)
        r = float(np.linalg.norm(F))
        history.append(r)
        k += 1
    rel = r / ref if ref > 0 else 0.0
    report = NewtonReport(
        iterations=k,
        abs_residual=r,
        rel_residual=rel,
        damping=damping,
        max_iter=max_iter,
        converged=bool(np.isfinite(r) and done(r)),
        residuals=history,
    )
    return z, report


def semismooth_newton(residual, jacobian, z0, policy=None, *, atol=ATOL, rtol=RTOL,
                      ref_norm=None, linear_solver=sparse_lu_solve):
    """Solve ``residual(z) = 0`` walking down the damping ladder on failure.

    ``jacobian(z)`` must return a sparse generalized Jacobian. Raises
    :class:`NewtonFailure` once the damping would drop below the floor.
    """
    policy = policy if policy is not None else DampingPolicy()
    escalations = 0
    while True:
        z, report = newton_attempt(
            residual, jacobian, z0, damping=policy.damping, max_iter=policy.max_iter,
            atol=atol, rtol=rtol, ref_norm=ref_norm, linear_solver=linear_solver,
        )
        report.escalations = escalations
        if report.converged:
            return z, report
        policy.escalate()
        escalations += 1
        if policy.exhausted:
            report.escalations = escalations
            raise NewtonFailure(
                f"Newton failed down to damping {report.damping:g} "
                f"(residual {report.abs_residual:.3e})",
                report,
            )
