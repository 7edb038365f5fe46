"""
Scenario definition and unit handling.

A Scenario is the single immutable source of truth for one optimization run:
geometry, radio constants, thresholds and weights, all in SI units.
"""
import hashlib
import json
from dataclasses import dataclass, field, asdict, replace

import numpy as np


DEFAULT_AREA = (0.0, 0.0, 500.0, 500.0)


class ScenarioError(ValueError):
    """Invalid scenario; ``errors`` maps field name to a list of messages."""

    def __init__(self, errors):
        self.errors = dict(errors)
        summary = '; '.join(f"{name}: {' '.join(map(str, msgs))}" for name, msgs in self.errors.items())
        super().__init__(summary or 'invalid scenario')


def db_to_linear(x):
    """Power ratio from decibels."""
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def dbm_to_watts(x):
    return db_to_linear(x) / 1000.0


@dataclass(frozen=True)
class RadioConstants:
    """Physical antenna/propagation constants (optional path to eps0 and beta0)."""
    gain_tx: float
    gain_comm: float
    gain_sensing: float
    wavelength: float
    rcs: float

    def errors(self):
        return {
            name: ['must be > 0']
            for name, value in asdict(self).items()
            if not (np.isfinite(value) and value > 0)
        }


def reference_powers(rc):
    """Reference channel powers at 1 m: (eps0, beta0)."""
    problems = rc.errors()
    if problems:
        raise ScenarioError(problems)
    eps0 = rc.gain_tx * rc.gain_comm * rc.wavelength ** 2 / (4 * np.pi) ** 2
    beta0 = rc.gain_tx * rc.gain_sensing * rc.rcs * rc.wavelength ** 2 / (4 * np.pi) ** 3
    return eps0, beta0


@dataclass(frozen=True)
class Scenario:
    U: int
    K: int
    Nt: int
    Nr: int
    cs_positions: np.ndarray
    ts_position: np.ndarray
    rx_uav_position: np.ndarray
    uav_altitude: float
    rx_altitude: float
    eps0: float
    beta0: float
    noise_power: float
    bandwidth: float
    p_max: float
    rate_threshold: np.ndarray
    sensing_threshold: float
    weights: np.ndarray
    area: tuple = field(default=DEFAULT_AREA)

    def __post_init__(self):
        # Freeze array fields so the record can be shared across workers.
        for name in ('cs_positions', 'ts_position', 'rx_uav_position', 'rate_threshold', 'weights'):
            value = np.array(getattr(self, name), dtype=float)
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'area', tuple(float(v) for v in self.area))

    # Derived quantities used throughout the optimizer
    @property
    def ts_range_sq(self):
        """Squared distance receive UAV -> trapped survivor."""
        diff = self.rx_uav_position - self.ts_position
        return float(diff @ diff + self.rx_altitude ** 2)

    @property
    def sensing_scale(self):
        """beta0 / (r0^2 sigma^2): converts sum_u tr(R_u A_u)/r_u^2 to SNR."""
        return self.beta0 / (self.ts_range_sq * self.noise_power)

    def with_changes(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        data = {}
        for name, value in asdict(self).items():
            data[name] = value.tolist() if isinstance(value, np.ndarray) else value
        data['area'] = list(self.area)
        return data

    def fingerprint(self):
        """Stable short hash of the scenario contents."""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def scenario_errors(s):
    errors = {}

    def add(name, message):
        errors.setdefault(name, []).append(message)

    if s.U < 1:
        add('U', 'at least one ISAC UAV is required')
    if s.K < s.U:
        add('K', f'K={s.K} < U={s.U}: every UAV cluster must hold at least one CS')
    if s.Nt < 1:
        add('Nt', 'must be >= 1')
    if s.Nr < 1:
        add('Nr', 'must be >= 1')
    if s.cs_positions.shape != (s.K, 2):
        add('cs_positions', f'expected shape ({s.K}, 2), got {s.cs_positions.shape}')
    for name in ('cs_positions', 'ts_position', 'rx_uav_position'):
        value = getattr(s, name)
        if not np.all(np.isfinite(value)):
            add(name, 'positions must be finite')
    for name in ('ts_position', 'rx_uav_position'):
        if getattr(s, name).shape != (2,):
            add(name, 'expected a 2D point')
    for name in ('uav_altitude', 'rx_altitude'):
        if not getattr(s, name) > 0:
            add(name, 'altitude must be > 0')
    for name in ('eps0', 'beta0', 'noise_power', 'bandwidth', 'p_max'):
        value = getattr(s, name)
        if not (np.isfinite(value) and value > 0):
            add(name, 'must be > 0')
    if s.rate_threshold.shape != (s.K,):
        add('rate_threshold', f'expected {s.K} entries')
    elif np.any(s.rate_threshold < 0):
        add('rate_threshold', 'must be >= 0')
    if not s.sensing_threshold >= 0:
        add('sensing_threshold', 'must be >= 0')
    if s.weights.shape != (s.K,):
        add('weights', f'expected {s.K} entries')
    else:
        if np.any(s.weights < 0):
            add('weights', 'must be >= 0')
        if abs(float(s.weights.sum()) - 1.0) > 1e-9:
            add('weights', f'must sum to 1 (got {float(s.weights.sum()):.12g})')
    x_min, y_min, x_max, y_max = s.area
    if not (x_max > x_min and y_max > y_min):
        add('area', 'expected [x_min, y_min, x_max, y_max] with positive extent')
    return errors


def validate(s):
    """Return ``s`` unchanged when every invariant holds, else raise ScenarioError."""
    errors = scenario_errors(s)
    if errors:
        raise ScenarioError(errors)
    return s
