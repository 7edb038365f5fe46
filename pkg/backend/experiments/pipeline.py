"""
Three-stage optimization of one scenario: K-Means association once, then
beamforming and deployment stages alternated until the weighted sum rate
settles.
"""
import logging
import time
from dataclasses import dataclass, field, asdict

import numpy as np
from django.conf import settings

from baselines.schemes import SchemeId, layout_for
from beamforming.initial import mrt_beams
from beamforming.sca import sca_beamforming
from placement.association import kmeans_associate
from placement.deployment import optimize_deployment
from radio.channel import ChannelMode, channel_tensor
from radio.rates import evaluate_state

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunOptions:
    seed: int = 0
    channel_mode: str = ChannelMode.LOS_ONES
    scheme: str = SchemeId.CORSMA
    eps_outer: float = 1e-3
    eps_deployment: float = 1e-3
    eps_beamforming: float = 1e-3
    max_outer: int = 20
    max_deployment: int = 30
    max_beamforming: int = 20
    n_samples: int = 100
    sensing_beam: bool = True
    sensing_probe: bool = False
    # Applies to exact rate evaluation only (reports, deployment line search);
    # the relaxed beamforming program never sees the sensing interference
    include_sensing_interference: bool = False
    trust_region: float = None

    def __post_init__(self):
        for name in ('eps_outer', 'eps_deployment', 'eps_beamforming'):
            if not getattr(self, name) > 0:
                raise ValueError(f'{name} must be > 0')
        for name in ('max_outer', 'max_deployment', 'max_beamforming', 'n_samples'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be >= 1')
        object.__setattr__(self, 'scheme', SchemeId(self.scheme).value)
        object.__setattr__(self, 'channel_mode', ChannelMode(self.channel_mode).value)

    @property
    def objective(self):
        return 'sensing' if self.sensing_probe else 'wsr'

    def to_dict(self):
        return asdict(self)


@dataclass
class Solution:
    scheme: str
    status: str
    association: object
    positions: np.ndarray
    beams: object
    report: object
    covariances: object = None
    iterations: int = 0
    history: list = field(default_factory=list)
    beamforming_traces: list = field(default_factory=list)
    deployment_traces: list = field(default_factory=list)
    path: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    scenario_hash: str = ''
    options: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def allocation(self):
        return self.report.allocation

    def to_dict(self):
        """Result record: plain JSON types only."""
        beams = self.beams
        return {
            'tool_version': settings.TOOL_VERSION,
            'scenario_hash': self.scenario_hash,
            'scheme': self.scheme,
            'status': self.status,
            'options': self.options,
            'iterations': self.iterations,
            'association': self.association.to_dict(),
            'positions': np.asarray(self.positions).tolist(),
            'deployment_path': [np.asarray(p).tolist() for p in self.path],
            'beams': {
                name: {'real': np.real(getattr(beams, name)).tolist(), 'imag': np.imag(getattr(beams, name)).tolist()}
                for name in ('common', 'private', 'sensing')
            },
            'allocation': np.asarray(self.allocation).tolist(),
            'report': self.report.to_dict(),
            'history': list(self.history),
            'beamforming_traces': self.beamforming_traces,
            'deployment_traces': self.deployment_traces,
            'timings': self.timings,
            'notes': list(self.notes),
        }


def convergence_check(history, eps, T):
    """
    Decide whether the outer loop stops after the latest entry.

    Returns (stop, status) with status 'converged' or 'max_iter' when stopping.
    """
    if not history:
        raise ValueError('history must not be empty')
    if len(history) >= 2:
        previous, latest = history[-2], history[-1]
        if abs(latest - previous) / max(abs(latest), 1.0) < eps:
            return True, 'converged'
    if len(history) >= T:
        return True, 'max_iter'
    return False, None


def _clip_to_area(s, positions):
    x_min, y_min, x_max, y_max = s.area
    return np.column_stack([np.clip(positions[:, 0], x_min, x_max), np.clip(positions[:, 1], y_min, y_max)])


def run(s, opts=None):
    """Optimize one scenario; the returned report is recomputed from the final beams and positions."""
    opts = opts or RunOptions()
    mode = opts.channel_mode
    timings = {'association': 0.0, 'beamforming': 0.0, 'deployment': 0.0}

    started = time.perf_counter()
    association = kmeans_associate(s.cs_positions, s.U, seed=opts.seed)
    positions = _clip_to_area(s, association.centroids)
    timings['association'] = time.perf_counter() - started
    logger.info('association: clusters %s after %d K-Means steps',
                [c.tolist() for c in association.clusters], association.iterations)

    channels = channel_tensor(s, positions, mode, opts.seed)
    layout = layout_for(opts.scheme, association, channels)
    beams = mrt_beams(s, channels, association, positions, has_common=layout.has_common,
                      sensing_beam=opts.sensing_beam)

    history, bf_traces, dep_traces = [], [], []
    path = [positions.copy()]
    covariances = None
    best = None
    status = 'max_iter'
    iterations = 0
    notes = []

    for iterations in range(1, opts.max_outer + 1):
        started = time.perf_counter()
        stage = sca_beamforming(
            s, channels, association, positions, scheme=opts.scheme,
            beams=beams if iterations > 1 else None,
            eps=opts.eps_beamforming, max_iter=opts.max_beamforming, n_samples=opts.n_samples,
            seed=opts.seed, sensing_beam=opts.sensing_beam, sensing_probe=opts.sensing_probe,
            include_sensing=opts.include_sensing_interference, layout=layout,
        )
        timings['beamforming'] += time.perf_counter() - started
        bf_traces.append({'status': stage.status, 'iterations': stage.iterations, 'solves': stage.solves,
                          'trace': stage.trace, 'recovery': stage.recovery,
                          'relaxed_value': stage.relaxed_value, 'relaxed_exact': stage.relaxed_exact,
                          'diagnostics': stage.diagnostics})
        if stage.status == 'infeasible':
            notes.append(f'beamforming infeasible at outer iteration {iterations}: {stage.diagnostics}')
            status = 'infeasible'
            break

        beams, covariances = stage.beams, stage.covariances
        value = stage.report.wsr if opts.objective == 'wsr' else stage.report.sensing_snr
        if history and value < history[-1] - 1e-6 * max(abs(history[-1]), 1.0):
            logger.warning('outer iteration %d: objective fell %.9g -> %.9g after beamforming',
                           iterations, history[-1], value)
        history.append(value)
        if stage.report.is_feasible(s) and (best is None or value > best[0]):
            best = (value, positions.copy(), beams.copy(), covariances, channels, layout)

        stop, reason = convergence_check(history, opts.eps_outer, opts.max_outer)
        if stop:
            status = reason
            break

        started = time.perf_counter()
        deployment = optimize_deployment(
            s, positions, beams, stage.report.allocation, association, scheme=opts.scheme, mode=mode,
            seed=opts.seed, eps=opts.eps_deployment, max_iter=opts.max_deployment, objective=opts.objective,
            trust_region=opts.trust_region, include_sensing=opts.include_sensing_interference,
        )
        timings['deployment'] += time.perf_counter() - started
        dep_traces.append({'status': deployment.status, 'trace': deployment.trace})
        positions = deployment.positions
        path.extend(p.copy() for p in deployment.path[1:])
        channels = channel_tensor(s, positions, mode, opts.seed)
        layout = layout_for(opts.scheme, association, channels)

    report = evaluate_state(s, positions, beams, association, channels, layout,
                            include_sensing=opts.include_sensing_interference)
    current = report.wsr if opts.objective == 'wsr' else report.sensing_snr
    if best is not None and (not report.is_feasible(s) or best[0] > current):
        _, positions, beams, covariances, channels, layout = best
        report = evaluate_state(s, positions, beams, association, channels, layout,
                                include_sensing=opts.include_sensing_interference)
        notes.append('returned the best feasible incumbent')
    if not report.is_feasible(s):
        status = 'infeasible'

    logger.info('%s run finished: %s after %d outer iterations, WSR %.6g b/s, sensing SNR %.4g',
                opts.scheme, status, iterations, report.wsr, report.sensing_snr)
    return Solution(
        scheme=opts.scheme,
        status=status,
        association=association,
        positions=positions,
        beams=beams,
        report=report,
        covariances=covariances,
        iterations=iterations,
        history=history,
        beamforming_traces=bf_traces,
        deployment_traces=dep_traces,
        path=path,
        timings=timings,
        scenario_hash=s.fingerprint(),
        options=opts.to_dict(),
        notes=notes,
    )
