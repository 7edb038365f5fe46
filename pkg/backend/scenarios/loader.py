"""
Scenario file loading and ``key=value`` overrides.
"""
import json
import logging
from pathlib import Path

from .scenario import ScenarioError
from .serializers import ScenarioSerializer

logger = logging.getLogger(__name__)


def parse_override(text):
    """``key=value`` -> (key, value); the value is read as JSON when it parses."""
    if '=' not in text:
        raise ScenarioError({'--set': [f"expected key=value, got '{text}'"]})
    key, raw = text.split('=', 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw.strip()
    return key, value


def read_config(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f'scenario file not found: {path}')
    with path.open() as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ScenarioError({'config': [f'{path}: {exc}']}) from exc
    if not isinstance(data, dict):
        raise ScenarioError({'config': [f'{path}: top level must be an object']})
    return data


def apply_overrides(config, overrides):
    merged = dict(config)
    for key, value in dict(overrides or {}).items():
        # An override replaces the other unit spellings of the same field
        base = key.removesuffix('_dbm').removesuffix('_db')
        for stale in (base, f'{base}_db', f'{base}_dbm'):
            if stale != key:
                merged.pop(stale, None)
        merged[key] = value
    return merged


def scenario_from_config(config, overrides=None):
    serializer = ScenarioSerializer(data=apply_overrides(config, overrides))
    if not serializer.is_valid():
        raise ScenarioError(serializer.errors)
    scenario = serializer.save()
    logger.debug('scenario %s loaded (U=%d, K=%d)', scenario.fingerprint(), scenario.U, scenario.K)
    return scenario


def load_scenario(path, overrides=None):
    return scenario_from_config(read_config(path), overrides)
