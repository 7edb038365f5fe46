"""
Parameter sweeps: one pipeline run per (value, scheme, seed) on a bounded
joblib pool; the parent process collects every result and is the only
writer of the output directory.
"""
import copy
import json
import logging
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from scenarios.loader import scenario_from_config
from .pipeline import RunOptions, run

logger = logging.getLogger(__name__)

RUN_COLUMNS = ['kind', 'parameter', 'value', 'scheme', 'seed', 'status', 'wsr', 'common_ratio',
               'sensing_snr', 'iterations', 'runtime', 'scenario_hash', 'result_file', 'error']
METRICS = ['wsr', 'common_ratio', 'sensing_snr', 'iterations', 'runtime']

# Keys that also exist in unit-suffixed spellings
_SPELLINGS = {
    'sensing_threshold': ('sensing_threshold', 'sensing_threshold_db'),
    'p_max_dbm': ('p_max', 'p_max_db', 'p_max_dbm'),
}


def point_config(base, parameter, value, seed):
    """
    Scenario config of one sweep point. CS positions are redrawn from the
    seed; per-CS vectors are dropped when K changes so their defaults follow.
    """
    config = copy.deepcopy(base)
    for key in _SPELLINGS.get(parameter, (parameter,)):
        config.pop(key, None)
    config[parameter] = int(value) if parameter in ('K', 'U', 'Nt') else float(value)
    config.pop('cs_positions', None)
    config['cs_drop_seed'] = int(seed)
    if parameter == 'K':
        config.pop('weights', None)
        if isinstance(config.get('rate_threshold'), list):
            config['rate_threshold'] = float(np.max(config['rate_threshold']))
    return config


def _settings_ready():
    from django.apps import apps
    if not apps.ready:
        import django
        django.setup()


def run_point(config, parameter, value, scheme, seed, options):
    """One sweep point; failures come back in the row instead of raising."""
    _settings_ready()
    row = {'kind': 'run', 'parameter': parameter, 'value': value, 'scheme': scheme, 'seed': seed}
    started = time.perf_counter()
    with threadpool_limits(limits=1):
        try:
            s = scenario_from_config(point_config(config, parameter, value, seed))
            opts = RunOptions(**{**options, 'scheme': scheme, 'seed': seed})
            solution = run(s, opts)
        except Exception as exc:  # recorded in-row, the sweep goes on
            logger.exception('sweep point %s=%s %s seed %s failed', parameter, value, scheme, seed)
            row.update(status='error', error=f'{type(exc).__name__}: {exc}',
                       runtime=time.perf_counter() - started)
            return row, None
    report = solution.report
    row.update(
        status=solution.status,
        wsr=report.wsr,
        common_ratio=report.common_ratio,
        sensing_snr=report.sensing_snr,
        iterations=solution.iterations,
        runtime=time.perf_counter() - started,
        scenario_hash=solution.scenario_hash,
        error='',
    )
    return row, solution.to_dict()


def new_run_directory(root, prefix):
    """Fresh directory under ``root``; existing ones are never reused."""
    root = Path(root)
    stamp = datetime.now(timezone.utc).strftime('%Y%m%dT%H%M%S')
    candidate = root / f'{prefix}-{stamp}'
    counter = 1
    while candidate.exists():
        counter += 1
        candidate = root / f'{prefix}-{stamp}-{counter}'
    candidate.mkdir(parents=True)
    return candidate


def summarize(runs):
    """Seed mean per (value, scheme) over the runs that produced a result."""
    ok = runs[runs['status'] != 'error']
    if ok.empty:
        return pd.DataFrame(columns=RUN_COLUMNS)
    summary = ok.groupby(['parameter', 'value', 'scheme'], as_index=False)[METRICS].mean()
    counts = ok.groupby(['parameter', 'value', 'scheme']).size().reset_index(name='seed')
    summary = summary.merge(counts, on=['parameter', 'value', 'scheme'])
    summary['kind'] = 'summary'
    summary['status'] = ''
    return summary.reindex(columns=RUN_COLUMNS)


class Manifest:
    def __init__(self, directory, scenario_hash):
        self.directory = Path(directory)
        self.scenario_hash = scenario_hash
        self.entries = []

    def add(self, path, kind, scenario_hash=None):
        self.entries.append({
            'file': str(Path(path).relative_to(self.directory)),
            'kind': kind,
            'scenario_hash': scenario_hash or self.scenario_hash,
            'tool_version': settings.TOOL_VERSION,
        })

    def write(self):
        path = self.directory / 'manifest.json'
        path.write_text(json.dumps({'tool_version': settings.TOOL_VERSION, 'files': self.entries}, indent=2))
        return path


def write_result(directory, name, record):
    path = Path(directory) / name
    path.write_text(json.dumps(record, indent=2))
    return path


def execute_sweep(spec, base_config, out_dir, workers=None):
    """
    Run every point of ``spec`` (validated SweepSpecSerializer data) and
    write per-run result files, ``sweep.csv`` and ``manifest.json`` into
    a new directory under ``out_dir``. Returns (directory, table, manifest);
    the manifest is already written and may be extended and rewritten.
    """
    workers = workers or settings.CORSMA['WORKERS']
    parameter = spec['parameter']
    options = dict(spec.get('run_options') or {})
    points = [(value, scheme, seed) for value in spec['values'] for scheme in spec['schemes']
              for seed in range(spec['seeds'])]
    logger.info('sweep over %s: %d points on %d workers', parameter, len(points), workers)

    results = Parallel(n_jobs=workers, backend='loky')(
        delayed(run_point)(base_config, parameter, value, scheme, seed, options)
        for value, scheme, seed in points
    )

    base_hash = scenario_from_config(base_config).fingerprint()
    directory = new_run_directory(out_dir, f'sweep-{parameter}')
    manifest = Manifest(directory, base_hash)
    rows = []
    for index, (row, record) in enumerate(results):
        if record is not None:
            name = f"run-{index:04d}-{row['scheme']}-seed{row['seed']}.json"
            path = write_result(directory, name, record)
            manifest.add(path, 'result', row['scenario_hash'])
            row['result_file'] = name
        rows.append(row)

    runs = pd.DataFrame(rows).reindex(columns=RUN_COLUMNS)
    table = pd.concat([runs, summarize(runs)], ignore_index=True)
    csv_path = directory / 'sweep.csv'
    table.to_csv(csv_path, index=False, float_format='%.9g')
    manifest.add(csv_path, 'table')
    manifest.write()
    return directory, table, manifest
