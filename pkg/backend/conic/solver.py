"""
cvxpy backend for ConicProgram.
"""
import logging
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from django.conf import settings

from .program import NonNeg, SecondOrder, Exponential, PSD, SYMMETRIC

logger = logging.getLogger(__name__)


OPTIMAL = 'optimal'
INFEASIBLE = 'infeasible'
UNBOUNDED = 'unbounded'
INACCURATE = 'inaccurate'

STATUS_MAP = {
    cp.OPTIMAL: OPTIMAL,
    cp.OPTIMAL_INACCURATE: INACCURATE,
    cp.INFEASIBLE: INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: INFEASIBLE,
    cp.UNBOUNDED: UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: UNBOUNDED,
}


def solver_options(solver):
    """Backend settings; the duality-gap tolerance comes from CORSMA['GAP_TOL']."""
    gap = settings.CORSMA['GAP_TOL']
    if solver == 'CLARABEL':
        return {'tol_gap_abs': gap, 'tol_gap_rel': gap}
    if solver == 'SCS':
        return {'eps_abs': 1e-7, 'eps_rel': max(gap, 1e-7), 'max_iters': 200000}
    return {}


@dataclass
class ConicSolution:
    status: str
    values: dict = field(default_factory=dict)
    objective: float = float('nan')
    residual: float = float('inf')
    solver: str = ''
    diagnostics: str = ''

    @property
    def has_primal(self):
        return bool(self.values) and self.status in (OPTIMAL, INACCURATE)

    def value(self, expr):
        return expr.value(self.values)

    def __getitem__(self, name):
        return self.values[name]


def default_tolerance():
    return settings.CORSMA['FEASIBILITY_TOL']


def _to_cvxpy(program):
    handles = {}
    for name, variable in program.variables.items():
        if variable.kind == SYMMETRIC:
            handles[name] = cp.Variable(variable.shape, symmetric=True, name=name)
        else:
            handles[name] = cp.Variable(variable.shape, name=name)

    def expression(affine):
        total = cp.Constant(affine.constant)
        for name, coef in affine.terms.items():
            if np.any(coef):
                total = total + cp.sum(cp.multiply(coef, handles[name]))
        return total

    constraints = []
    for constraint in program.constraints:
        if isinstance(constraint, NonNeg):
            constraints.append(expression(constraint.expr) >= 0)
        elif isinstance(constraint, SecondOrder):
            x = cp.hstack([expression(e) for e in constraint.x])
            constraints.append(cp.SOC(expression(constraint.t), x))
        elif isinstance(constraint, Exponential):
            constraints.append(cp.constraints.ExpCone(
                expression(constraint.x), expression(constraint.y), expression(constraint.z)))
        elif isinstance(constraint, PSD):
            constraints.append(handles[constraint.variable] >> 0)
    problem = cp.Problem(cp.Maximize(expression(program.objective)), constraints)
    return problem, handles


def primal_residual(program, values):
    """Largest scaled violation over all constraints for the given primal point."""
    worst = 0.0
    for constraint in program.constraints:
        if isinstance(constraint, NonNeg):
            v = constraint.expr.value(values)
            scale = max(1.0, constraint.expr.magnitude(values))
            violation = max(0.0, -v) / scale
        elif isinstance(constraint, SecondOrder):
            t = constraint.t.value(values)
            norm = float(np.linalg.norm([e.value(values) for e in constraint.x]))
            violation = max(0.0, norm - t) / max(1.0, abs(t), norm)
        elif isinstance(constraint, Exponential):
            x = constraint.x.value(values)
            y = constraint.y.value(values)
            z = constraint.z.value(values)
            if y > 0 and z > 0:
                violation = max(0.0, x - y * np.log(z / y)) / max(1.0, abs(x))
            else:
                violation = max(0.0, -y, -z, x if y <= 0 else 0.0)
        elif isinstance(constraint, PSD):
            Y = values[constraint.variable]
            lam_min = float(np.linalg.eigvalsh(0.5 * (Y + Y.T))[0])
            violation = max(0.0, -lam_min) / max(1.0, float(np.abs(Y).max(initial=0.0)))
        else:
            continue
        worst = max(worst, violation)
    return worst


def _solve_with(program, solver):
    problem, handles = _to_cvxpy(program)
    try:
        problem.solve(solver=solver, **solver_options(solver))
    except (cp.error.SolverError, ValueError, ArithmeticError) as exc:
        return ConicSolution(status=INACCURATE, solver=solver, diagnostics=f'{solver} failed: {exc}')

    status = STATUS_MAP.get(problem.status, INACCURATE)
    values = {}
    if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        # Variables absent from every constraint come back as None
        values = {
            name: np.zeros(h.shape) if h.value is None else np.array(h.value, dtype=float)
            for name, h in handles.items()
        }
    objective = float(problem.value) if values and problem.value is not None else float('nan')
    diagnostics = '' if problem.status == cp.OPTIMAL else f'{solver} status {problem.status}'
    return ConicSolution(status=status, values=values, objective=objective, solver=solver, diagnostics=diagnostics)


def solve(program, tol=None, solver=None):
    """
    Solve a ConicProgram. Never raises on solver trouble: failures come back
    as status ``inaccurate`` with diagnostics, after one retry on the
    fallback backend.
    """
    program.check()
    tol = default_tolerance() if tol is None else tol
    primary = solver or settings.CORSMA['SOLVER']
    fallback = settings.CORSMA['FALLBACK_SOLVER']

    result = _solve_with(program, primary)
    if result.status == INACCURATE and not result.values and fallback and fallback != primary:
        logger.warning('%s: %s; retrying with %s', program.label or 'program', result.diagnostics, fallback)
        result = _solve_with(program, fallback)

    if result.values:
        result.residual = primal_residual(program, result.values)
        if result.status == OPTIMAL and result.residual > tol:
            result.status = INACCURATE
            result.diagnostics = f'primal residual {result.residual:.3g} above {tol:.1g}'
    return result
