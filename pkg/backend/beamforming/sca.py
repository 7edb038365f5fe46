"""
Beamforming stage: relaxed program solved repeatedly, each time
relinearized at the incumbent interference levels, then rank-one recovery.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from baselines.schemes import layout_for, SchemeId
from conic.solver import solve, OPTIMAL, INACCURATE
from radio.rates import evaluate_state
from .initial import mrt_beams, private_covariances, interference_levels, DEFAULT_SPLIT, FALLBACK_SPLITS
from .rank_one import gaussian_randomization, covariance_report
from .sdp import build_beamforming_sdp, read_covariances, relaxed_objective, Linearization

logger = logging.getLogger(__name__)

# Families dropped one at a time when explaining an infeasible start
DIAGNOSED_FAMILIES = ('qos', 'sensing', 'power', 'common', 'private')

# Extrapolated steps are tried while the last step moved by more than this many eps
EXTRAPOLATE_ABOVE = 10.0


@dataclass
class BeamformingResult:
    status: str                     # 'converged', 'max_iter' or 'infeasible'
    beams: object
    report: object = None
    covariances: object = None
    relaxed_value: float = float('nan')
    relaxed_exact: float = float('nan')
    trace: list = field(default_factory=list)
    iterations: int = 0
    solves: int = 0
    recovery: dict = field(default_factory=dict)
    diagnostics: str = ''


def linearize_at_beams(s, channels, beams, association, layout):
    common, individual = interference_levels(s, channels, private_covariances(beams, association), layout)
    return Linearization.from_levels(common, individual)


def linearize_at_covariances(s, channels, cov, layout):
    common, individual = interference_levels(s, channels, cov.private, layout)
    return Linearization.from_levels(common, individual)


def diagnose(sdp):
    """Name the constraint families whose removal makes the program feasible."""
    culprits = []
    present = set(sdp.program.families())
    for family in DIAGNOSED_FAMILIES:
        if family not in present:
            continue
        trial = solve(sdp.program.without_family(family))
        if trial.status in (OPTIMAL, INACCURATE) and trial.has_primal:
            culprits.append(family)
    if culprits:
        return 'infeasible; feasible without: ' + ', '.join(culprits)
    return 'infeasible; no single constraint family explains it'


def _first_solve(s, channels, association, positions, layout, beams, options):
    """Solve at the given start, then at fallback starts; returns (sdp, solution)."""
    starts = [beams] if beams is not None else []
    starts.extend(
        mrt_beams(s, channels, association, positions, split, layout.has_common, options['sensing_beam'])
        for split in (DEFAULT_SPLIT,) + FALLBACK_SPLITS
    )
    sdp = solution = None
    for attempt, start in enumerate(starts):
        linearization = linearize_at_beams(s, channels, start, association, layout)
        sdp = build_beamforming_sdp(s, channels, association, positions, linearization, layout,
                                    options['sensing_beam'], options['sensing_probe'])
        solution = solve(sdp.program)
        if solution.has_primal:
            if attempt:
                logger.info('beamforming: feasible start found on attempt %d', attempt + 1)
            return sdp, solution
    return sdp, solution


def _solve_at(s, channels, association, positions, layout, linearization, options):
    """Build and solve the program around ``linearization``; None without a primal."""
    sdp = build_beamforming_sdp(s, channels, association, positions, linearization, layout,
                                options['sensing_beam'], options['sensing_probe'])
    solution = solve(sdp.program)
    if not solution.has_primal:
        return None
    return sdp, solution, relaxed_objective(s, solution, sdp)


def sca_beamforming(s, channels, association, positions, scheme=SchemeId.CORSMA, beams=None, eps=1e-3,
                    max_iter=20, n_samples=100, seed=0, sensing_beam=True, sensing_probe=False,
                    include_sensing=False, layout=None):
    """
    Optimize beams and common-rate allocation at fixed UAV positions.

    ``beams`` (the incumbent, MRT when omitted) sets the first linearization
    point. Every step relinearizes at the incumbent covariances. While the
    incumbent keeps moving, an extrapolated expansion point is tried first
    and kept only when it improves the relaxed objective by more than
    ``eps``; the extrapolation length doubles after each success and resets
    after a miss. Stops when a plain step changes the relaxed objective by
    less than ``eps`` (relative) or after ``max_iter`` accepted steps.
    """
    layout = layout or layout_for(scheme, association, channels)
    options = {'sensing_beam': sensing_beam, 'sensing_probe': sensing_probe}
    objective = 'sensing' if sensing_probe else 'wsr'

    sdp, solution = _first_solve(s, channels, association, positions, layout, beams, options)
    if not solution.has_primal:
        diagnostics = diagnose(sdp)
        logger.warning('beamforming[%s] %s', layout.scheme, diagnostics)
        start = beams if beams is not None else mrt_beams(
            s, channels, association, positions, DEFAULT_SPLIT, layout.has_common, sensing_beam)
        report = evaluate_state(s, positions, start, association, channels, layout, include_sensing=include_sensing)
        return BeamformingResult('infeasible', start, report, diagnostics=diagnostics)

    value = relaxed_objective(s, solution, sdp)
    cov = read_covariances(s, solution, sdp)
    trace = [{'iteration': 1, 'objective': value, 'residual': solution.residual, 'status': solution.status,
              'step': 'start'}]
    status = 'max_iter'
    iterations = solves = 1
    previous = None
    factor = 1.0
    change = np.inf

    def accept(step, result, expansion):
        nonlocal sdp, solution, value, cov, previous, change, iterations
        previous = expansion
        sdp, solution, new_value = result
        change = abs(new_value - value) / max(abs(value), 1e-12)
        value = new_value
        cov = read_covariances(s, solution, sdp)
        iterations += 1
        trace.append({'iteration': iterations, 'objective': value, 'residual': solution.residual,
                      'status': solution.status, 'step': step})

    while iterations < max_iter:
        current = linearize_at_covariances(s, channels, cov, layout)
        if previous is not None and change > EXTRAPOLATE_ABOVE * eps:
            solves += 1
            trial = _solve_at(s, channels, association, positions, layout,
                              current.extrapolated(previous, factor), options)
            if trial is not None and trial[2] > value + eps * max(abs(value), 1e-12):
                accept('extrapolated', trial, current)
                factor *= 2.0
                continue
            factor = 1.0

        solves += 1
        result = _solve_at(s, channels, association, positions, layout, current, options)
        if result is None:
            logger.warning('beamforming: relinearized program has no primal, keeping incumbent')
            status = 'converged'
            break
        if result[2] < value:
            if result[2] < value - 1e-6 * max(abs(value), 1.0):
                logger.warning('beamforming: objective decreased %.9g -> %.9g at iteration %d',
                               value, result[2], iterations + 1)
            status = 'converged'
            break
        accept('plain', result, current)
        if change < eps:
            status = 'converged'
            break

    bound = covariance_report(s, positions, cov, channels, layout)
    recovery = gaussian_randomization(s, cov, channels, association, positions, layout, n_samples=n_samples,
                                      seed=seed, objective=objective, include_sensing=include_sensing)
    relaxed_exact = bound.wsr if objective == 'wsr' else bound.sensing_snr
    achieved = recovery.report.wsr if objective == 'wsr' else recovery.report.sensing_snr
    # The relaxed optimum bounds every rank-one state up to the last linearization gap
    gap = (achieved - value) / max(abs(value), 1e-12)
    if gap > eps:
        logger.warning('rank-one %s %.9g exceeds the relaxed optimum %.9g', objective, achieved, value)

    return BeamformingResult(
        status=status,
        beams=recovery.beams,
        report=recovery.report,
        covariances=cov,
        relaxed_value=value,
        relaxed_exact=relaxed_exact,
        trace=trace,
        iterations=iterations,
        solves=solves,
        recovery={
            'method': str(recovery.method),
            'status': recovery.status,
            'dominance': recovery.dominance,
            'feasible_samples': recovery.feasible_samples,
            'bound_gap': gap,
        },
    )
