"""Undamped Newton iteration on the reduced system."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .forms import Discretisation, assemble
from .linear_solver import factor_and_solve, relative_residual
from .space import SystemState

log = logging.getLogger(__name__)

# a residual within this factor of the estimated round-off floor is noise;
# iteration continues there only while the steps keep shrinking
FLOOR_FACTOR = 10.0


@dataclass
class NewtonReport:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    final_energy: float = float("nan")
    linear_residuals: list[float] = field(default_factory=list)
    stop_reason: str = ""

    def quadratic_constants(self) -> list[float]:
        """r_{k+1} / r_k^2 over consecutive iterations."""
        r = self.residual_history
        return [r[k + 1] / r[k] ** 2 for k in range(len(r) - 1) if r[k] > 0]


def roundoff_floor(jacobian, x: np.ndarray) -> float:
    """Residual size produced by rounding x alone: eps * || (row norms of J) * |x| ||."""
    absj = abs(jacobian)
    rows = np.sqrt(np.asarray(absj.multiply(absj).sum(axis=1)).ravel())
    return float(np.finfo(float).eps * np.linalg.norm(rows * np.abs(x)))


def newton_solve(disc: Discretisation, initial: SystemState, tol_abs: float = 1e-12,
                 tol_rel: float = 1e-12, max_iter: int = 30,
                 tol_step: float = 1e-10) -> tuple[SystemState, NewtonReport]:
    """Full Newton steps from ``initial``; Dirichlet values in ``initial`` are kept.

    Stops when the reduced residual norm drops below max(tol_abs, tol_rel * r0),
    or when a step changes the free DOFs by at most tol_step relative to their
    size, or when the residual sits within FLOOR_FACTOR of ``roundoff_floor``
    and the step no longer halves. Near the floor the residual norm stops
    carrying information while the smooth error modes can still be
    converging, so the step length is what is watched there. Growth of the residual over five consecutive steps ends the
    iteration unconverged.
    """
    if tol_abs <= 0 or tol_rel <= 0 or tol_step < 0 or max_iter < 1:
        raise ValueError("tolerances must be positive and max_iter >= 1")
    x = disc.pack(initial)
    free = disc.free
    report = NewtonReport()
    system = assemble(disc, disc.unpack(x))
    r0 = float(np.linalg.norm(system.residual))
    report.residual_history.append(r0)
    target = max(tol_abs, tol_rel * r0)
    growth = 0
    prev_step = np.inf
    while True:
        if report.residual_history[-1] <= target:
            report.converged, report.stop_reason = True, "residual"
            break
        if report.iterations >= max_iter:
            report.stop_reason = "max_iter"
            break
        dx = factor_and_solve(system.jacobian, -system.residual)
        report.linear_residuals.append(relative_residual(system.jacobian, dx, -system.residual))
        x[free] += dx
        report.iterations += 1
        system = assemble(disc, disc.unpack(x))
        r = float(np.linalg.norm(system.residual))
        log.debug("newton %d: |R| = %.3e |dx| = %.3e", report.iterations, r, np.linalg.norm(dx))
        growth = growth + 1 if r > report.residual_history[-1] else 0
        report.residual_history.append(r)
        if not np.isfinite(r) or growth >= 5:
            report.stop_reason = "diverged"
            break
        if r <= target:
            continue
        step = float(np.linalg.norm(dx))
        if step <= tol_step * np.linalg.norm(x[free]):
            report.converged, report.stop_reason = True, "step"
            break
        if step > 0.5 * prev_step and r <= FLOOR_FACTOR * roundoff_floor(system.jacobian, x[free]):
            report.converged, report.stop_reason = True, "stagnated"
            break
        prev_step = step
    report.final_energy = system.energy
    return disc.unpack(x), report

