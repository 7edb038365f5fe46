"""
Numerical self-checks: analytic gradients against central differences, the
closed-form sensing SNR against its Monte-Carlo estimate, the equivalence
of the rearranged QoS ball, and a few structural invariants.
"""
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from baselines.schemes import layout_for
from conic.embedding import hermitian_to_real_embedding
from conic.program import ConicProgram
from conic.solver import solve, OPTIMAL
from placement.association import kmeans_associate
from placement.deployment import (
    SurrogateTerms, exact_rhat, private_rate_surrogate, taylor_private_rate, qos_ball_bound,
    qos_surrogate_holds, sensing_taylor, steering_trace,
)
from radio.channel import channel_tensor
from radio.rates import BeamformingState, SymbolBlock, sensing_snr, sensing_snr_monte_carlo
from scenarios.loader import load_scenario

logger = logging.getLogger(__name__)

GRADIENT_TOL = 1e-5
ORACLE_TOL = 0.02
INJECTIONS = ('sensing-gradient',)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_beams(s, association, rng, power=None):
    """Random beams on the associated columns, each UAV at ``power`` (P_max by default)."""
    beams = BeamformingState.zeros(s.U, s.K, s.Nt)

    def draw(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    beams.common[:] = draw(s.U, s.Nt)
    beams.sensing[:] = draw(s.U, s.Nt)
    for k, u in enumerate(association.owner):
        beams.private[u, k] = draw(s.Nt)
    scale = np.sqrt((power or s.p_max) / beams.uav_powers())
    beams.common *= scale[:, None]
    beams.private *= scale[:, None, None]
    beams.sensing *= scale[:, None]
    return beams


def random_positions(s, rng):
    x_min, y_min, x_max, y_max = s.area
    return np.column_stack([rng.uniform(x_min, x_max, s.U), rng.uniform(y_min, y_max, s.U)])


def _central_difference(fn, x, step):
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        delta = np.zeros_like(x)
        delta.flat[i] = step
        grad.flat[i] = (fn(x + delta) - fn(x - delta)) / (2 * step)
    return grad


def _relative_error(analytic, numeric, scale):
    return float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), scale))


def check_gradients(s, rng, points=50, inject=None):
    association = kmeans_associate(s.cs_positions, s.U, seed=0)
    layout = layout_for('CORSMA', association)
    worst = {'rate position': 0.0, 'rate slack': 0.0, 'sensing': 0.0, 'steering trace': 0.0}
    for _ in range(points):
        beams = random_beams(s, association, rng)
        positions = random_positions(s, rng)
        rhat = exact_rhat(s, positions) * rng.uniform(0.5, 1.5, size=(s.U, s.K))
        terms = SurrogateTerms.build(s, beams, association, layout)
        k = int(rng.integers(s.K))
        u = association.owner[k]
        coeffs = taylor_private_rate(s, terms, association, k, positions, rhat)

        def rate_at(o):
            moved = positions.copy()
            moved[u] = o
            return private_rate_surrogate(s, terms, association, k, moved, rhat)

        numeric = _central_difference(rate_at, positions[u], 1e-3)
        scale = 1e-3 * abs(coeffs.A) / s.uav_altitude
        worst['rate position'] = max(worst['rate position'], _relative_error(coeffs.c, numeric, scale))

        for i in np.flatnonzero(terms.inter[:, k] > 0):
            def rate_at_slack(value, i=i):
                moved = rhat.copy()
                moved[i, k] = value[0]
                return private_rate_surrogate(s, terms, association, k, positions, moved)

            numeric = _central_difference(rate_at_slack, [rhat[i, k]], 1e-6 * rhat[i, k])
            scale = 1e-3 * abs(coeffs.A) / rhat[i, k]
            worst['rate slack'] = max(
                worst['rate slack'], _relative_error(coeffs.slack_gradient[i:i + 1], numeric, scale))

        w = int(rng.integers(s.U))
        R = beams.transmit_covariance(w)
        taylor = sensing_taylor(s, R, positions[w])
        e = -taylor.e if inject == 'sensing-gradient' else taylor.e

        def ratio_at(o):
            diff = o - s.ts_position
            return steering_trace(R, o, s) / (diff @ diff + s.uav_altitude ** 2)

        numeric = _central_difference(ratio_at, positions[w], 1e-3)
        worst['sensing'] = max(worst['sensing'], _relative_error(e, numeric, 1e-3 * taylor.H / s.uav_altitude))
        numeric = _central_difference(lambda o: steering_trace(R, o, s), positions[w], 1e-3)
        trace_scale = 1e-3 * abs(steering_trace(R, positions[w], s)) / s.uav_altitude
        worst['steering trace'] = max(worst['steering trace'], _relative_error(taylor.F, numeric, trace_scale))

    return [
        CheckResult(f'gradient: {name}', error < GRADIENT_TOL, f'max relative error {error:.3g} over {points} points')
        for name, error in worst.items()
    ]


def check_sensing_oracle(s, rng, draws=20000, block=SymbolBlock(16)):
    results = []
    for U in (1, 3):
        if U > s.K:
            continue
        scenario = s.with_changes(U=U)
        association = kmeans_associate(scenario.cs_positions, U, seed=0)
        beams = random_beams(scenario, association, rng)
        positions = random_positions(scenario, rng)
        closed = sensing_snr(scenario, positions, beams)
        estimate = sensing_snr_monte_carlo(scenario, positions, beams, block=block, draws=draws,
                                           seed=int(rng.integers(2 ** 31)))
        error = abs(estimate - closed) / closed
        results.append(CheckResult(
            f'sensing SNR oracle U={U}', error < ORACLE_TOL,
            f'closed form {closed:.6g}, Monte-Carlo {estimate:.6g}, relative error {error:.3g}, '
            f'{draws * block.L} samples',
        ))
    return results


def check_qos_ball(s, rng, tuples=100):
    association = kmeans_associate(s.cs_positions, s.U, seed=0)
    layout = layout_for('CORSMA', association)
    agree = 0
    for _ in range(tuples):
        beams = random_beams(s, association, rng)
        positions = random_positions(s, rng)
        rhat = exact_rhat(s, positions) * rng.uniform(0.5, 1.5, size=(s.U, s.K))
        terms = SurrogateTerms.build(s, beams, association, layout)
        k = int(rng.integers(s.K))
        u = association.owner[k]
        C_k = rng.uniform(0.0, s.rate_threshold[k])
        bound = qos_ball_bound(s, terms, association, k, C_k, rhat)
        diff = positions[u] - s.cs_positions[k]
        inside = bool(diff @ diff <= bound)
        agree += inside == qos_surrogate_holds(s, terms, association, k, C_k, positions[u], rhat)
    return [CheckResult('QoS ball equivalence', agree == tuples, f'{agree}/{tuples} agree')]


def check_invariants(s, rng):
    results = []
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    M = A @ A.conj().T
    lam = np.linalg.eigvalsh(hermitian_to_real_embedding(M))
    results.append(CheckResult('embedding keeps PSD', lam.min() > -1e-9 * lam.max(), f'min eigenvalue {lam.min():.3g}'))

    program = ConicProgram(label='exp oracle')
    x = program.scalar('x')
    program.exp_leq(x, 5.0)
    program.maximize(x)
    solution = solve(program)
    value = solution.value(x) if solution.has_primal else float('nan')
    results.append(CheckResult(
        'conic exponential oracle', solution.status == OPTIMAL and abs(value - np.log(5.0)) < 1e-6,
        f'{solution.status}, x = {value:.9g}'))

    association = kmeans_associate(s.cs_positions, s.U, seed=0)
    # Off the centroids, so no two CSs of a cluster tie on channel strength
    positions = association.centroids + rng.normal(0.0, 5.0, association.centroids.shape)
    channels = channel_tensor(s, positions)
    layout = layout_for('NOMA', association, channels)
    perm = rng.permutation(s.K)
    permuted = s.with_changes(cs_positions=s.cs_positions[perm], rate_threshold=s.rate_threshold[perm],
                              weights=s.weights[perm])
    p_assoc = kmeans_associate(permuted.cs_positions, s.U, init=association.centroids)
    p_layout = layout_for('NOMA', p_assoc, channel_tensor(permuted, positions))
    same = all(
        sorted(perm[list(p_layout.interferers[i])]) == sorted(layout.interferers[perm[i]])
        for i in range(s.K)
    )
    results.append(CheckResult('NOMA order ignores input order', same, f'{s.K} CSs permuted'))
    return results


def run_selftest(inject=None, seed=0):
    if inject is not None and inject not in INJECTIONS:
        raise ValueError(f'unknown injection {inject!r}; choose from {INJECTIONS}')
    s = load_scenario(settings.CORSMA['DEFAULT_SCENARIO'])
    rng = np.random.default_rng(seed)
    results = []
    results += check_gradients(s, rng, inject=inject)
    results += check_sensing_oracle(s, rng)
    results += check_qos_ball(s, rng)
    results += check_invariants(s, rng)
    for result in results:
        logger.debug('%s: %s (%s)', result.name, 'pass' if result.passed else 'FAIL', result.detail)
    return results
