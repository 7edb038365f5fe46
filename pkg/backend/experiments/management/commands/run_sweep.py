import math

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError
from django.utils import timezone

from baselines.schemes import SchemeId
from experiments.models import ExperimentRun, Sweep
from experiments.serializers import ExperimentRunSerializer, SweepSerializer, SweepSpecSerializer
from experiments.sweeps import execute_sweep, write_result
from scenarios.loader import apply_overrides, parse_override, read_config, scenario_from_config
from scenarios.scenario import ScenarioError


def _number(value):
    return None if value is None or (isinstance(value, float) and math.isnan(value)) else float(value)


class Command(BaseCommand):
    help = 'Runs a parameter sweep and writes the CSV table, result files and manifest'

    def add_arguments(self, parser):
        parser.add_argument('--sweep', required=True, help='Sweep specification JSON file')
        parser.add_argument('--config', default=None,
                            help='Base scenario (defaults to the spec entry, then the bundled scenario)')
        parser.add_argument('--out-dir', default=str(settings.CORSMA['RESULTS_DIR']))
        parser.add_argument('--seeds', type=int, default=None, help='Seeds per point')
        parser.add_argument('--scheme', action='append', choices=SchemeId.values, default=None,
                            help='Restrict to these schemes (repeatable)')
        parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                            help='Base scenario override')
        parser.add_argument('--workers', type=int, default=None,
                            help='Pool size (default CORSMA_WORKERS)')

    def handle(self, *args, **options):
        try:
            spec_data = read_config(options['sweep'])
            if options['seeds'] is not None:
                spec_data['seeds'] = options['seeds']
            if options['scheme']:
                spec_data['schemes'] = options['scheme']
            serializer = SweepSpecSerializer(data=spec_data)
            if not serializer.is_valid():
                raise CommandError(f'Invalid sweep specification: {serializer.errors}')
            spec = serializer.validated_data

            config_path = options['config'] or spec.get('base_scenario') or settings.CORSMA['DEFAULT_SCENARIO']
            overrides = dict(parse_override(item) for item in options['set'])
            base_config = apply_overrides(read_config(config_path), overrides)
            base = scenario_from_config(base_config)
        except FileNotFoundError as exc:
            raise CommandError(str(exc))
        except ScenarioError as exc:
            raise CommandError(f'Invalid input: {exc}')

        points = len(spec['values']) * len(spec['schemes']) * spec['seeds']
        self.stdout.write(f"Sweeping {spec['parameter']} over {spec['values']} "
                          f"({len(spec['schemes'])} schemes, {spec['seeds']} seeds, {points} runs)")

        sweep = self._start(spec, base, options['out_dir'])
        directory, table, manifest = execute_sweep(spec, base_config, options['out_dir'], options['workers'])
        runs = table[table['kind'] == 'run']
        failures = runs[runs['status'].isin(['error', 'infeasible'])]
        if self._finish(sweep, runs, directory):
            record = dict(SweepSerializer(sweep).data)
            record['runs'] = ExperimentRunSerializer(sweep.runs.order_by('id'), many=True).data
            manifest.add(write_result(directory, 'records.json', record), 'record')
            manifest.write()

        self.stdout.write(f'  table     {directory / "sweep.csv"}')
        self.stdout.write(f'  manifest  {directory / "manifest.json"}')
        if len(failures):
            self.stdout.write(self.style.WARNING(f'{len(failures)} of {len(runs)} runs failed or were infeasible'))
        self.stdout.write(self.style.SUCCESS('Sweep complete!'))

    def _start(self, spec, base, out_dir):
        try:
            return Sweep.objects.create(
                parameter=spec['parameter'],
                values=list(spec['values']),
                schemes=list(spec['schemes']),
                seeds=spec['seeds'],
                scenario_hash=base.fingerprint(),
                out_dir=str(out_dir),
                tool_version=settings.TOOL_VERSION,
            )
        except DatabaseError as exc:
            self.stdout.write(self.style.WARNING(f'Sweep not recorded in the database: {exc}'))
            return None

    def _finish(self, sweep, runs, directory):
        if sweep is None:
            return False
        sweep.out_dir = str(directory)
        sweep.status = 'DONE'
        sweep.finished_at = timezone.now()
        sweep.save()
        ExperimentRun.objects.bulk_create([
            ExperimentRun(
                sweep=sweep,
                scenario_hash=row.scenario_hash if isinstance(row.scenario_hash, str) else '',
                scheme=row.scheme,
                seed=int(row.seed),
                parameter=row.parameter,
                value=_number(row.value),
                status=row.status,
                wsr=_number(row.wsr),
                common_ratio=_number(row.common_ratio),
                sensing_snr=_number(row.sensing_snr),
                iterations=int(row.iterations) if _number(row.iterations) is not None else 0,
                runtime=_number(row.runtime) or 0.0,
                result_path=str(directory / row.result_file) if isinstance(row.result_file, str) else '',
                error=row.error if isinstance(row.error, str) else '',
            )
            for row in runs.itertuples(index=False)
        ])
        return True
