import json
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from closures import __version__
from closures.exceptions import PhiClosureError
from closures.exporters import FORMATS, ResultWriter, to_jsonable
from closures.forms import COMMAND_CHOICES, RunConfigForm
from closures.models import BenchmarkRun
from closures.services import BenchmarkService

logger = logging.getLogger(__name__)

CONFIG_ERROR = 2
NUMERICAL_ERROR = 3
IO_ERROR = 4

# flag name -> config key; None values mean "not given"
OVERRIDES = ('target', 'family', 'K', 'N', 'interval', 'x0', 'seed', 'out', 'format', 'starts',
             'workers', 'exactness', 'window', 'lebedev', 'points', 'tol', 'max_iter', 'sigma')


class Command(BaseCommand):
    help = 'Build renormalization maps and run the moment-closure benchmarks.'

    def add_arguments(self, parser):
        parser.add_argument('subcommand', choices=[name for name, _ in COMMAND_CHOICES])
        parser.add_argument('--config', help='Flat JSON run configuration; flags override its keys')
        parser.add_argument('--target', choices=['BS', 'BE'], help='BS (exponential) or BE (Planckian)')
        parser.add_argument('--family', choices=['beta', 'taylor', 'optimized'])
        parser.add_argument('--K', dest='K', type=int, help='Odd degree for beta, degree 2K+1 otherwise')
        parser.add_argument('--N', dest='N', type=int, help='Maximum spherical harmonic degree')
        parser.add_argument('--interval', nargs=2, type=float, metavar=('A', 'B'))
        parser.add_argument('--x0', type=float, help='Taylor expansion point')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--format', choices=FORMATS)
        parser.add_argument('--starts', type=int, help='Random Newton starts for optimized fits')
        parser.add_argument('--workers', type=int)
        parser.add_argument('--exactness', type=int, help='Quadrature exactness override')
        parser.add_argument('--window', nargs=2, type=float, metavar=('LO', 'HI'), help='Curve sampling window')
        parser.add_argument('--lebedev', help='Lebedev rule file (azimuth polar weight, degrees)')
        parser.add_argument('--points', type=int, help='Curve sample count')
        parser.add_argument('--tol', type=float)
        parser.add_argument('--max-iter', dest='max_iter', type=int)
        parser.add_argument('--sigma', type=float, help='Scattering coefficient for collision moments')

    def handle(self, *args, **options):
        command = options['subcommand']
        config = self._load_config(options.get('config'))
        config['command'] = command
        for key in OVERRIDES:
            value = options.get(key)
            if value is not None:
                config[key] = list(value) if isinstance(value, (list, tuple)) else value

        form = RunConfigForm(data=config)
        if not form.is_valid():
            message = form.error_summary()
            logger.error(f"invalid configuration for {command}: {message}")
            raise CommandError(f"Invalid configuration: {message}", returncode=CONFIG_ERROR)
        run_config = form.to_config()

        out_dir = Path(run_config.get('out') or Path(settings.PHICLOSURE_OUTPUT_DIR) / command)
        echo = {k: v for k, v in run_config.items() if k != 'out'}
        record = self._start_record(command, echo)

        try:
            output = BenchmarkService(run_config).run()
            writer = ResultWriter(out_dir, run_config['format'], metadata={
                'command': command,
                'config': to_jsonable(echo),
                'version': __version__,
                'quadrature': '; '.join(output.quadrature) or 'none',
            })
            paths = [writer.write_report(name, report) for name, report in output.reports.items()]
            paths += [writer.write_table(t.name, t.headers, t.rows) for t in output.tables]
        except PhiClosureError as exc:
            self._finish_record(record, error=exc)
            logger.error(f"{command} failed: {exc.message}")
            raise CommandError(exc.message, returncode=exc.exit_code)
        except OSError as exc:
            self._finish_record(record, error=exc)
            raise CommandError(f"I/O failure: {exc}", returncode=IO_ERROR)
        except Exception as exc:
            self._finish_record(record, error=exc)
            logger.exception(f"{command} failed unexpectedly")
            raise CommandError(f"{command} failed: {exc}", returncode=NUMERICAL_ERROR)

        for path in paths:
            self.stdout.write(f"Wrote {path}")
        if output.failure is not None:
            self._finish_record(record, error=output.failure, outputs=paths)
            raise CommandError(output.failure.message, returncode=output.failure.exit_code)

        self._finish_record(record, outputs=paths, label=output.label)
        self.stdout.write(self.style.SUCCESS(f"{command} finished: {output.label}"))

    def _load_config(self, path):
        if not path:
            return {}
        try:
            with open(path, encoding='utf-8') as handle:
                data = json.load(handle)
        except OSError as exc:
            raise CommandError(f"Cannot read config file {path}: {exc}", returncode=IO_ERROR)
        except json.JSONDecodeError as exc:
            raise CommandError(f"Config file {path} is not valid JSON: {exc}", returncode=CONFIG_ERROR)
        if not isinstance(data, dict):
            raise CommandError(f"Config file {path} must hold a flat JSON object", returncode=CONFIG_ERROR)
        return data

    def _start_record(self, command, config):
        if not getattr(settings, 'PHICLOSURE_RECORD_RUNS', False):
            return None
        try:
            record = BenchmarkRun.objects.create(command=command, config=to_jsonable(config))
            record.mark_running()
            return record
        except DatabaseError as exc:
            logger.warning(f"run recording unavailable: {exc}")
            return None

    def _finish_record(self, record, error=None, outputs=(), label=None):
        if record is None:
            return
        try:
            if error is None:
                record.mark_completed(outputs, label=label)
            else:
                details = to_jsonable(getattr(error, 'details', {}) or {})
                details['outputs'] = [str(p) for p in outputs]
                record.set_error(getattr(error, 'message', str(error)), details)
        except DatabaseError as exc:
            logger.warning(f"could not update run record {record.pk}: {exc}")
