from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from baselines.schemes import SchemeId, layout_for
from beamforming.sca import linearize_at_beams
from beamforming.sdp import build_beamforming_sdp
from conic.dump import write_program
from experiments.models import ExperimentRun
from experiments.pipeline import run
from experiments.serializers import ExperimentRunSerializer, RunOptionsSerializer
from experiments.sweeps import Manifest, new_run_directory, write_result
from radio.channel import channel_tensor
from scenarios.loader import load_scenario, parse_override
from scenarios.scenario import ScenarioError


class Command(BaseCommand):
    help = 'Optimizes one scenario and writes its result file'

    def add_arguments(self, parser):
        parser.add_argument('--config', default=str(settings.CORSMA['DEFAULT_SCENARIO']),
                            help='Scenario JSON file')
        parser.add_argument('--out-dir', default=str(settings.CORSMA['RESULTS_DIR']))
        parser.add_argument('--scheme', choices=SchemeId.values, default=SchemeId.CORSMA)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                            help='Scenario override, value read as JSON when possible')
        parser.add_argument('--option', action='append', default=[], metavar='KEY=VALUE',
                            help='Run option override (e.g. channel_mode=RAYLEIGH)')
        parser.add_argument('--dump-program', action='store_true',
                            help='Also write the beamforming program at the final positions')

    def handle(self, *args, **options):
        try:
            overrides = dict(parse_override(item) for item in options['set'])
            scenario = load_scenario(options['config'], overrides)
            run_data = dict(parse_override(item) for item in options['option'])
        except FileNotFoundError as exc:
            raise CommandError(str(exc))
        except ScenarioError as exc:
            raise CommandError(f'Invalid scenario: {exc}')

        run_data.update(scheme=options['scheme'], seed=options['seed'])
        serializer = RunOptionsSerializer(data=run_data)
        if not serializer.is_valid():
            raise CommandError(f'Invalid run options: {serializer.errors}')
        opts = serializer.save()

        self.stdout.write(f'Running {opts.scheme} on scenario {scenario.fingerprint()} '
                          f'(U={scenario.U}, K={scenario.K}, seed={opts.seed})')
        solution = run(scenario, opts)

        directory = new_run_directory(options['out_dir'], f'run-{opts.scheme}')
        manifest = Manifest(directory, solution.scenario_hash)
        result_path = write_result(directory, 'result.json', solution.to_dict())
        manifest.add(result_path, 'result')
        if options['dump_program']:
            channels = channel_tensor(scenario, solution.positions, opts.channel_mode, opts.seed)
            layout = layout_for(opts.scheme, solution.association, channels)
            sdp = build_beamforming_sdp(
                scenario, channels, solution.association, solution.positions,
                linearize_at_beams(scenario, channels, solution.beams, solution.association, layout),
                layout, opts.sensing_beam, opts.sensing_probe,
            )
            manifest.add(write_program(sdp.program, directory / 'program.txt'), 'program')
        record = self._record(solution, opts, result_path)
        if record is not None:
            manifest.add(write_result(directory, 'record.json', ExperimentRunSerializer(record).data), 'record')
        manifest.write()

        report = solution.report
        self.stdout.write(f'  WSR            {report.wsr:.6g} b/s')
        self.stdout.write(f'  common ratio   {report.common_ratio:.4f}')
        self.stdout.write(f'  sensing SNR    {report.sensing_snr:.4g}')
        self.stdout.write(f'  iterations     {solution.iterations}')
        self.stdout.write(f'  result         {result_path}')

        if solution.status == 'infeasible':
            raise CommandError(f'Run ended infeasible: {"; ".join(solution.notes) or "see result file"}')
        style = self.style.SUCCESS if solution.status == 'converged' else self.style.WARNING
        self.stdout.write(style(f'Run finished: {solution.status}'))

    def _record(self, solution, opts, result_path):
        try:
            return ExperimentRun.objects.create(
                scenario_hash=solution.scenario_hash,
                scheme=solution.scheme,
                seed=opts.seed,
                status=solution.status,
                wsr=solution.report.wsr,
                common_ratio=solution.report.common_ratio,
                sensing_snr=solution.report.sensing_snr,
                iterations=solution.iterations,
                runtime=sum(solution.timings.values()),
                options=opts.to_dict(),
                result_path=str(Path(result_path)),
            )
        except DatabaseError as exc:
            self.stdout.write(self.style.WARNING(f'Run not recorded in the database: {exc}'))
            return None
