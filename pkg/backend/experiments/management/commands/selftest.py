from django.core.management.base import BaseCommand, CommandError

from experiments.selftest import INJECTIONS, run_selftest


class Command(BaseCommand):
    help = 'Runs the gradient, sensing-oracle and invariant self-checks'

    def add_arguments(self, parser):
        parser.add_argument('--inject', choices=INJECTIONS, default=None,
                            help='Plant a known fault to see the matching check fail')
        parser.add_argument('--seed', type=int, default=0)

    def handle(self, *args, **options):
        results = run_selftest(inject=options['inject'], seed=options['seed'])
        for result in results:
            mark = self.style.SUCCESS('PASS') if result.passed else self.style.ERROR('FAIL')
            self.stdout.write(f'{mark}  {result.name}: {result.detail}')

        failed = [r.name for r in results if not r.passed]
        if failed:
            raise CommandError(f'{len(failed)} of {len(results)} checks failed: {", ".join(failed)}')
        self.stdout.write(self.style.SUCCESS(f'All {len(results)} checks passed'))
