"""
UAV deployment by successive convex approximation.

With beams, association and common-rate allocation fixed, each step builds a
convex program in the horizontal UAV positions:

* the private rate of every CS (all-ones channel surrogate) is replaced by
  its first-order expansion in the serving UAV position and in the
  inter-cluster distance slacks;
* the QoS requirement becomes a convex ball around the CS;
* the sensing SNR requirement is linearized in every UAV position;
* the distance slacks are bounded by the linearization of the (convex)
  squared distance, which keeps them below the true squared distance.

Steps are accepted by backtracking on the exact objective, and only when the
exact constraints (QoS, common-rate decodability, sensing, power) hold.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from baselines.schemes import layout_for
from conic.program import ConicProgram, Affine, affine_sum, rotated_soc
from conic.solver import solve, OPTIMAL, INACCURATE
from radio.channel import channel_tensor, distance3d, steering_tx, ChannelMode
from radio.rates import evaluate_state, LN2

logger = logging.getLogger(__name__)

STEP_SIZES = (1.0, 0.5, 0.25, 0.125, 0.0625)


@dataclass
class DeploymentIterate:
    positions: np.ndarray       # (U, 2), meters
    rhat: np.ndarray            # (U, K), m^2; entries for a UAV's own CSs are unused


@dataclass
class TaylorCoefficients:
    """First-order expansion of one CS's private-rate surrogate."""
    A: float                    # value at the expansion point, b/s
    c: np.ndarray               # gradient in the serving UAV position, b/s per m
    slack_gradient: np.ndarray  # (U,) gradient in rhat_{i,k}, b/s per m^2


@dataclass
class SensingTaylor:
    H: float                    # tr(R_u A(o_u)) / r_u^2 at the expansion point
    e: np.ndarray               # its gradient in o_u
    F: np.ndarray               # gradient of tr(R_u A(o_u)) alone


@dataclass
class SurrogateTerms:
    """Beam powers along the all-ones direction, arranged per CS."""
    signal: np.ndarray          # (K,) |1 p_k|^2
    intra: np.ndarray           # (K,) interfering streams of the serving UAV
    inter: np.ndarray           # (U, K) interfering streams of every other UAV
    noise_ratio: float          # sigma^2 / eps0
    share: float                # bandwidth share of the scheme

    @classmethod
    def build(cls, s, beams, association, layout):
        ones_power = np.abs(beams.private.sum(axis=2)) ** 2       # (U, K): |1 p_{u,j}|^2
        stream_power = ones_power.sum(axis=0)                     # each stream has one owner
        owner = association.owner
        intra = np.zeros(s.K)
        inter = np.zeros((s.U, s.K))
        for k in range(s.K):
            for j in layout.interferers[k]:
                if owner[j] == owner[k]:
                    intra[k] += stream_power[j]
                else:
                    inter[owner[j], k] += stream_power[j]
        return cls(stream_power, intra, inter, s.noise_power / s.eps0, layout.bandwidth_share)


def squared_range(o, H, q):
    diff = np.asarray(o, dtype=float) - np.asarray(q, dtype=float)
    return float(diff @ diff + H ** 2)


def exact_rhat(s, positions):
    """rhat_{i,k} = r^2(o_i, q_k), the tight slack value."""
    positions = np.asarray(positions, dtype=float)
    return distance3d(positions[:, None, :], s.uav_altitude, s.cs_positions[None, :, :]) ** 2


def _psi(terms, k, rhat):
    """Inter-cluster interference per unit squared range plus sigma^2/eps0."""
    a = terms.inter[:, k]
    active = a > 0
    return float(np.sum(a[active] / rhat[active, k]) + terms.noise_ratio)


def _denominator(terms, k, r_sq, rhat):
    return terms.intra[k] + r_sq * _psi(terms, k, rhat)


def private_rate_surrogate(s, terms, association, k, positions, rhat):
    """All-ones-channel private rate of CS k with inter-cluster ranges replaced by rhat."""
    u = association.owner[k]
    r_sq = squared_range(positions[u], s.uav_altitude, s.cs_positions[k])
    sinr = terms.signal[k] / _denominator(terms, k, r_sq, rhat)
    return terms.share * s.bandwidth * np.log1p(sinr) / LN2


def qos_exponent(s, terms, k, C_k):
    """SINR level the private stream must reach: 2^((R_th - C_k)/(share B)) - 1."""
    return np.expm1(LN2 * (s.rate_threshold[k] - C_k) / (terms.share * s.bandwidth))


def qos_ball_bound(s, terms, association, k, C_k, rhat):
    """
    Largest ||o_u - q_k||^2 meeting the QoS of CS k.

    Returns +inf when the common allocation alone meets the threshold (the
    constraint is dropped); a negative value means no position meets it at
    these beams.
    """
    if C_k >= s.rate_threshold[k]:
        return np.inf
    level = qos_exponent(s, terms, k, C_k)
    psi = _psi(terms, k, rhat)
    return (terms.signal[k] / level - terms.intra[k]) / psi - s.uav_altitude ** 2


def qos_surrogate_holds(s, terms, association, k, C_k, position, rhat):
    """The QoS inequality before rearrangement: SINR >= 2^((R_th - C_k)/B) - 1."""
    if C_k >= s.rate_threshold[k]:
        return True
    r_sq = squared_range(position, s.uav_altitude, s.cs_positions[k])
    sinr = terms.signal[k] / _denominator(terms, k, r_sq, rhat)
    return bool(sinr >= qos_exponent(s, terms, k, C_k))


def taylor_private_rate(s, terms, association, k, positions, rhat):
    u = association.owner[k]
    diff = np.asarray(positions[u], dtype=float) - s.cs_positions[k]
    r_sq = float(diff @ diff + s.uav_altitude ** 2)
    psi = _psi(terms, k, rhat)
    lower = terms.intra[k] + r_sq * psi                 # interference-plus-noise term
    upper = lower + terms.signal[k]                     # total received term
    scale = terms.share * s.bandwidth / LN2
    A = scale * np.log1p(terms.signal[k] / lower)
    common = scale * terms.signal[k] / (lower * upper)
    c = -2.0 * common * psi * diff
    slack_gradient = np.zeros(s.U)
    active = terms.inter[:, k] > 0
    slack_gradient[active] = common * terms.inter[active, k] * r_sq / rhat[active, k] ** 2
    return TaylorCoefficients(A=float(A), c=c, slack_gradient=slack_gradient)


def steering_trace(R, o, s):
    """tr(R A(o, q_0)) with A = a a^H, a the transmit steering vector toward the TS."""
    a = steering_tx(o, s.ts_position, s.uav_altitude, R.shape[0])
    return float(np.real(a.conj() @ R @ a))


def steering_trace_gradient(R, o, s):
    """Gradient of tr(R A(o, q_0)) in o, from the magnitude/phase form of R's upper triangle."""
    o = np.asarray(o, dtype=float)
    H = s.uav_altitude
    r = distance3d(o, H, s.ts_position)
    n = R.shape[0]
    p, q = np.triu_indices(n, k=1)
    lag = q - p
    entries = R[p, q]
    angle = np.angle(entries) + np.pi * lag * H / r
    weight = 2.0 * np.pi * np.sum(np.abs(entries) * np.sin(angle) * lag) * H / r ** 3
    return weight * (o - s.ts_position)


def sensing_taylor(s, R, o):
    o = np.asarray(o, dtype=float)
    r_sq = squared_range(o, s.uav_altitude, s.ts_position)
    trace = steering_trace(R, o, s)
    F = steering_trace_gradient(R, o, s)
    e = (F * r_sq - 2.0 * trace * (o - s.ts_position)) / r_sq ** 2
    return SensingTaylor(H=trace / r_sq, e=e, F=F)


def sensing_requirement(s):
    """r0^2 sigma^2 gamma_bar / beta0: what sum_u tr(R_u A_u)/r_u^2 must reach."""
    return s.ts_range_sq * s.noise_power * s.sensing_threshold / s.beta0


@dataclass
class DeploymentSubproblem:
    program: ConicProgram
    iterate: DeploymentIterate
    length_scale: float
    pairs: list                     # (i, k) pairs carrying an rhat variable
    unreachable: list               # CSs whose QoS ball is empty at these beams


def build_deployment_subproblem(s, iterate, beams, allocation, association, layout=None,
                                objective='wsr', trust_region=None):
    """
    Convex deployment step around ``iterate``.

    Variables are in scaled units: positions divided by the UAV altitude,
    rates in nats per channel use, slacks in altitude^2.
    """
    layout = layout or layout_for('CORSMA', association)
    terms = SurrogateTerms.build(s, beams, association, layout)
    L = s.uav_altitude
    h = 1.0
    o0 = np.asarray(iterate.positions, dtype=float)
    rhat0 = np.asarray(iterate.rhat, dtype=float)
    rate_unit = s.bandwidth / LN2

    program = ConicProgram(label='deployment')
    pos = program.vector('pos', 2 * s.U)
    f = program.vector('f', s.K)

    def x(u):
        return pos[2 * u], pos[2 * u + 1]

    pairs = [(i, k) for k in range(s.K) for i in range(s.U) if terms.inter[i, k] > 0]
    slack = {pair: program.scalar(f'rhat_{pair[0]}_{pair[1]}') for pair in pairs}

    # Expansion of the private-rate surrogate
    for k in range(s.K):
        u = association.owner[k]
        coeffs = taylor_private_rate(s, terms, association, k, o0, rhat0)
        xu, yu = x(u)
        bound = Affine.const(coeffs.A / rate_unit)
        bound = bound + (coeffs.c[0] * L / rate_unit) * (xu - o0[u, 0] / L)
        bound = bound + (coeffs.c[1] * L / rate_unit) * (yu - o0[u, 1] / L)
        for i in np.flatnonzero(coeffs.slack_gradient):
            bound = bound + (coeffs.slack_gradient[i] * L ** 2 / rate_unit) * (slack[(i, k)] - rhat0[i, k] / L ** 2)
        program.leq(f[k], bound, family='rate')

    # QoS balls
    unreachable = []
    for k in range(s.K):
        if allocation[k] >= s.rate_threshold[k]:
            continue
        u = association.owner[k]
        level = qos_exponent(s, terms, k, allocation[k])
        budget = terms.signal[k] / level - terms.intra[k]
        if budget <= 0:
            unreachable.append(k)
            continue
        xu, yu = x(u)
        dx = xu - s.cs_positions[k, 0] / L
        dy = yu - s.cs_positions[k, 1] / L
        t = program.scalar(f'ball_{k}')
        rotated_soc(program, t, 1.0, [dx, dy], family='qos')
        lhs = (terms.noise_ratio * L ** 2 / budget) * (t + h ** 2)
        for i in range(s.U):
            if (i, k) not in slack:
                continue
            w = program.scalar(f'ratio_{i}_{k}')
            rotated_soc(program, w, slack[(i, k)], [dx, dy, Affine.const(h)], family='qos')
            lhs = lhs + (terms.inter[i, k] / budget) * w
        program.leq(lhs, 1.0, family='qos')

    # Linearized sensing requirement
    required = sensing_requirement(s)
    sensing_lin = Affine()
    for u in range(s.U):
        taylor = sensing_taylor(s, beams.transmit_covariance(u), o0[u])
        xu, yu = x(u)
        sensing_lin = sensing_lin + taylor.H
        sensing_lin = sensing_lin + (taylor.e[0] * L) * (xu - o0[u, 0] / L) + (taylor.e[1] * L) * (yu - o0[u, 1] / L)
    if objective == 'wsr' and required > 0:
        program.geq(sensing_lin / required, 1.0, family='sensing')

    # Distance slacks below the linearized squared range
    for (i, k), r in slack.items():
        xi, yi = x(i)
        d = (o0[i] - s.cs_positions[k]) / L
        linear = Affine.const(d @ d + h ** 2) + 2.0 * d[0] * (xi - o0[i, 0] / L) + 2.0 * d[1] * (yi - o0[i, 1] / L)
        program.leq(r, linear, family='slack')

    # Area box and optional trust region
    x_min, y_min, x_max, y_max = s.area
    for u in range(s.U):
        xu, yu = x(u)
        program.geq(xu, x_min / L, family='area')
        program.leq(xu, x_max / L, family='area')
        program.geq(yu, y_min / L, family='area')
        program.leq(yu, y_max / L, family='area')
        if trust_region:
            for axis, coord in enumerate((xu, yu)):
                program.leq(coord, (o0[u, axis] + trust_region) / L, family='trust')
                program.geq(coord, (o0[u, axis] - trust_region) / L, family='trust')

    if objective == 'wsr':
        program.maximize(affine_sum(s.weights[k] * f[k] for k in range(s.K)))
    else:
        program.maximize(sensing_lin * (1.0 / max(sensing_lin.constant, 1e-300)))

    return DeploymentSubproblem(program, iterate, L, pairs, unreachable)


@dataclass
class DeploymentResult:
    positions: np.ndarray
    status: str
    iterations: int
    trace: list = field(default_factory=list)
    path: list = field(default_factory=list)
    report: object = None


def _merit(report, s, objective):
    value = report.wsr if objective == 'wsr' else report.sensing_snr
    violation = max(
        report.power_excess / s.p_max,
        report.qos_shortfall / s.bandwidth,
        report.common_excess / s.bandwidth,
        report.sensing_shortfall / max(s.sensing_threshold, 1.0) if objective == 'wsr' else 0.0,
        0.0,
    )
    return value, violation


def _better(candidate, incumbent, tol):
    (value, violation), (best_value, best_violation) = candidate, incumbent
    if best_violation > tol:
        return violation < best_violation
    return violation <= tol and value >= best_value


def optimize_deployment(s, positions, beams, allocation, association, scheme='CORSMA',
                        mode=ChannelMode.LOS_ONES, seed=0, eps=1e-3, max_iter=30,
                        objective='wsr', trust_region=None, include_sensing=False, feas_tol=1e-6):
    """
    Iterate deployment subproblems from ``positions`` (K-Means centroids on
    the first call) until the exact objective changes by less than ``eps``
    (relative) or ``max_iter`` subproblems were solved.
    """
    allocation = np.asarray(allocation, dtype=float)

    def assess(candidate):
        channels = channel_tensor(s, candidate, mode, seed)
        layout = layout_for(scheme, association, channels)
        report = evaluate_state(s, candidate, beams, association, channels, layout,
                                allocation=allocation, include_sensing=include_sensing)
        return report, layout

    current = np.array(positions, dtype=float)
    report, layout = assess(current)
    merit = _merit(report, s, objective)
    trace = [{'iteration': 0, 'objective': merit[0], 'violation': merit[1], 'step': 0.0, 'subproblem': None}]
    path = [current.copy()]
    status = 'max_iter'
    iterations = 0

    for iterations in range(1, max_iter + 1):
        iterate = DeploymentIterate(current, exact_rhat(s, current))
        sub = build_deployment_subproblem(s, iterate, beams, allocation, association, layout, objective, trust_region)
        if sub.unreachable:
            logger.warning('deployment: QoS unreachable at current beams for CS %s', sub.unreachable)
            status = 'infeasible'
            break
        solution = solve(sub.program)
        if solution.status not in (OPTIMAL, INACCURATE) or not solution.values:
            logger.warning('deployment subproblem %s: %s', solution.status, solution.diagnostics)
            status = 'infeasible'
            break
        target = solution['pos'].reshape(s.U, 2) * sub.length_scale

        accepted = None
        for step in STEP_SIZES:
            candidate = current + step * (target - current)
            cand_report, cand_layout = assess(candidate)
            cand_merit = _merit(cand_report, s, objective)
            if _better(cand_merit, merit, feas_tol):
                accepted = (step, candidate, cand_report, cand_layout, cand_merit)
                break
        if accepted is None:
            status = 'converged'
            trace.append({'iteration': iterations, 'objective': merit[0], 'violation': merit[1],
                          'step': 0.0, 'subproblem': solution.objective})
            break

        step, current, report, layout, new_merit = accepted
        change = abs(new_merit[0] - merit[0]) / max(abs(merit[0]), 1e-12)
        merit = new_merit
        path.append(current.copy())
        trace.append({'iteration': iterations, 'objective': merit[0], 'violation': merit[1],
                      'step': step, 'subproblem': solution.objective})
        logger.debug('deployment iteration %d: objective %.6g, step %.3g', iterations, merit[0], step)
        if change < eps and merit[1] <= feas_tol:
            status = 'converged'
            break

    return DeploymentResult(
        positions=current, status=status, iterations=iterations,
        trace=trace, path=path, report=report,
    )
