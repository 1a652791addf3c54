"""Benchmark services behind the ``phiclosure`` management command.

Each command method returns a :class:`CommandOutput` (tables, JSON reports and
the quadrature rules it used); writing files is left to
:class:`closures.exporters.ResultWriter`. Batch commands run their rows on a
thread pool and record failures per row instead of aborting the table.
"""
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from . import closure, renorm, sos_fit, sphere
from .exceptions import ConfigurationError, NoConvergenceError, PhiClosureError, SingularJacobianError
from .renorm import MapFamily, RenormalizationMap, TargetFunction

logger = logging.getLogger(__name__)

CURVE_POINTS = 401
SPHERE_L2_EXACTNESS = 60
SIX_GAUSSIAN_EXTRA_EXACTNESS = 20
DEFAULT_SIGMA = 1.0

DEFAULT_TABLE_K = (1, 2, 3, 4, 5, 6)
DEFAULT_TABLE_L = {
    TargetFunction.BOLTZMANN_SHANNON: (1.0, 2.0, 3.0, 4.0, 5.0),
    TargetFunction.BOSE_EINSTEIN: (2.0, 6.0, 10.0),
}
DEFAULT_DECAY_N = (1, 3, 5, 7, 9)
DEFAULT_DECAY_MODELS = {
    TargetFunction.BOLTZMANN_SHANNON: ('beta_5', 'T_5(x0=0)', 'O_5[-5,5]'),
    TargetFunction.BOSE_EINSTEIN: ('T_5(x0=-2.6)', 'O_5[-5,-0.2]', 'O_5[-5,-0.5]'),
}
DEFAULT_COMPARE_INTERVAL = {
    TargetFunction.BOLTZMANN_SHANNON: (-5.0, 5.0),
    TargetFunction.BOSE_EINSTEIN: (-6.0, -1.0 / 6.0),
}

SINGLE_BEAM = ((0.0, 0.0, 1.0),)
DOUBLE_BEAM = ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0))


def setting(name: str, default):
    return getattr(settings, name, default)


class ErrorHandler:
    """Uniform success/error dicts for batch rows"""

    @staticmethod
    def success(message, data=None):
        response = {'success': True, 'message': message}
        if data is not None:
            response['data'] = data
        return response

    @staticmethod
    def error(message, details=None, exit_code=1):
        return {
            'success': False,
            'error': message,
            'details': details or {},
            'exit_code': exit_code,
        }

    @staticmethod
    def from_exception(exception):
        if isinstance(exception, PhiClosureError):
            return ErrorHandler.error(exception.message, exception.details, exception.exit_code)
        logger.exception(f"unexpected failure: {exception}")
        return ErrorHandler.error('Processing failed', {'type': type(exception).__name__})


# ---------------------------------------------------------------------------
# model labels

_LABEL = re.compile(
    r'^\s*(?P<prefix>beta|T|O)_(?P<degree>\d+)\s*'
    r'(?:\(\s*x0\s*=\s*(?P<x0>[^)]+?)\s*\)|\[\s*(?P<a>[^,\]]+?)\s*,\s*(?P<b>[^\]]+?)\s*\])?\s*$'
)
_PREFIX = {'beta': MapFamily.PHI_DIVERGENCE, 'T': MapFamily.TAYLOR, 'O': MapFamily.OPTIMIZED}


@dataclass(frozen=True)
class ModelSpec:
    """Family plus construction parameters; K is the odd degree for beta and 2K+1 is the degree otherwise"""
    family: MapFamily
    K: int
    x0: Optional[float] = None
    interval: Optional[Tuple[float, float]] = None

    @property
    def degree(self) -> int:
        return self.K if self.family is MapFamily.PHI_DIVERGENCE else 2 * self.K + 1

    def label(self) -> str:
        prefix = {v: k for k, v in _PREFIX.items()}[self.family]
        head = f"{prefix}_{self.degree}"
        if self.family is MapFamily.TAYLOR:
            return f"{head}(x0={self.x0:g})"
        if self.family is MapFamily.OPTIMIZED:
            return f"{head}[{self.interval[0]:g},{self.interval[1]:g}]"
        return head


def parse_model_label(text: str) -> ModelSpec:
    """'beta_5', 'T_5(x0=-5)' or 'O_5[-5,5]' (degree-labelled)"""
    match = _LABEL.match(str(text))
    if not match:
        raise ConfigurationError(f"Cannot parse model label '{text}'. Expected beta_D, T_D(x0=v) or O_D[a,b]")
    family = _PREFIX[match['prefix']]
    degree = int(match['degree'])
    if degree % 2 == 0:
        raise ConfigurationError(f"Model '{text}' has even degree {degree}; maps must have odd degree")
    try:
        if family is MapFamily.PHI_DIVERGENCE:
            if match['x0'] or match['a']:
                raise ConfigurationError(f"beta model '{text}' takes no parameters")
            return ModelSpec(family, degree)
        if family is MapFamily.TAYLOR:
            if match['x0'] is None:
                raise ConfigurationError(f"Taylor model '{text}' needs an expansion point, e.g. T_{degree}(x0=0)")
            return ModelSpec(family, (degree - 1) // 2, x0=float(match['x0']))
        if match['a'] is None:
            raise ConfigurationError(f"optimized model '{text}' needs an interval, e.g. O_{degree}[-5,5]")
        a, b = float(match['a']), float(match['b'])
    except ValueError as exc:
        raise ConfigurationError(f"Cannot parse numbers in model label '{text}': {exc}") from exc
    if not a < b:
        raise ConfigurationError(f"optimized model '{text}' needs a < b")
    return ModelSpec(family, (degree - 1) // 2, interval=(a, b))


def model_from_config(config: Dict[str, Any]) -> ModelSpec:
    family = MapFamily.parse(config['family'])
    interval = tuple(config['interval']) if config.get('interval') else None
    return ModelSpec(family, int(config['K']), x0=config.get('x0'), interval=interval)


# ---------------------------------------------------------------------------
# map construction

@dataclass(frozen=True)
class BuiltMap:
    map: RenormalizationMap
    fit: Optional[sos_fit.FitResult] = None
    problem: Optional[sos_fit.FitProblem] = None


class MapService:
    """Builds renormalization maps; optimized fits are cached per (target, K, interval)"""

    def __init__(self, target, starts=None, seed=None, workers=None, max_iter=None):
        self.target = TargetFunction.parse(target)
        self.starts = starts if starts is not None else setting('PHICLOSURE_FIT_STARTS', sos_fit.DEFAULT_STARTS)
        self.seed = seed if seed is not None else setting('PHICLOSURE_DEFAULT_SEED', 0)
        self.workers = workers if workers is not None else setting('PHICLOSURE_WORKERS', 1)
        self.max_iter = max_iter if max_iter is not None else setting('PHICLOSURE_FIT_MAX_ITER', sos_fit.MAX_ITER)
        self._fits: Dict[Tuple, BuiltMap] = {}

    def build(self, spec: ModelSpec, workers: Optional[int] = None) -> BuiltMap:
        if spec.family is MapFamily.PHI_DIVERGENCE:
            if self.target is not TargetFunction.BOLTZMANN_SHANNON:
                raise ConfigurationError("beta_K maps approximate the exponential only; use target BS")
            return BuiltMap(renorm.build_beta_K(spec.K))
        if spec.family is MapFamily.TAYLOR:
            if spec.x0 is None:
                raise ConfigurationError("Taylor maps need x0")
            return BuiltMap(renorm.build_taylor(self.target, spec.K, spec.x0))

        if spec.interval is None:
            raise ConfigurationError("optimized maps need an interval [a, b]")
        key = (self.target, spec.K, tuple(spec.interval))
        if key not in self._fits:
            problem = sos_fit.build_fit_problem(self.target, spec.K, spec.interval)
            result = sos_fit.fit(
                problem,
                starts=self.starts,
                seed=self.seed,
                max_iter=self.max_iter,
                workers=self.workers if workers is None else workers,
            )
            self._fits[key] = BuiltMap(result.map, result, problem)
        return self._fits[key]


# ---------------------------------------------------------------------------
# command outputs

@dataclass
class Table:
    name: str
    headers: List[str]
    rows: List[List[Any]]


@dataclass
class CommandOutput:
    label: str
    tables: List[Table] = field(default_factory=list)
    reports: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    quadrature: List[str] = field(default_factory=list)
    failure: Optional[PhiClosureError] = None


def _target_or_none(target: TargetFunction, xs: np.ndarray) -> List[Optional[float]]:
    lo, hi = target.domain
    return [float(target.value(x)) if lo < x < hi else None for x in xs]


def _max_abs_error(values: Sequence[float], reference: Sequence[Optional[float]]) -> Optional[float]:
    errors = [abs(v - r) for v, r in zip(values, reference) if r is not None]
    return max(errors) if errors else None


def _direction_record(theta: float, phi: float, omega: np.ndarray) -> Dict[str, Any]:
    return {'theta_deg': theta, 'phi_deg': phi, 'omega': omega.tolist()}


def inversion_failure(label: str, report: closure.InversionReport) -> PhiClosureError:
    """Exception describing a non-converged inversion; written files stay in place"""
    message = f"{label} inversion did not converge ({report.status}, |R| = {report.residual_norm:.3e})"
    if report.status == 'singular_jacobian':
        return SingularJacobianError(message, details=report.to_dict())
    return NoConvergenceError(message, details=report.to_dict())


class BenchmarkService:
    """Runs one configured command; ``config`` is cleaned RunConfigForm data"""

    def __init__(self, config: Dict[str, Any]):
        self.config = config
        self.target = TargetFunction.parse(config.get('target') or 'BS')
        self.workers = config.get('workers') or setting('PHICLOSURE_WORKERS', 1)
        self.tol = config.get('tol') or setting('PHICLOSURE_INVERT_TOL', closure.DEFAULT_TOL)
        self.max_iter = config.get('max_iter') or setting('PHICLOSURE_INVERT_MAX_ITER', closure.DEFAULT_MAX_ITER)
        self.maps = MapService(
            self.target,
            starts=config.get('starts'),
            seed=config.get('seed'),
            workers=self.workers,
        )

    def run(self) -> CommandOutput:
        handlers: Dict[str, Callable[[], CommandOutput]] = {
            'fit-map': self.fit_map,
            'compare-maps': self.compare_maps,
            'error-table': self.error_table,
            'invert-beam': self.invert_beam,
            'invert-double-beam': self.invert_double_beam,
            'invert-six-gaussian': self.invert_six_gaussian,
            'error-decay': self.error_decay,
        }
        command = self.config['command']
        if command not in handlers:
            raise ConfigurationError(f"Unknown command '{command}'")
        logger.info(f"running {command} with target {self.target.value}")
        return handlers[command]()

    def _batch(self, function: Callable, items: Sequence) -> List[Dict[str, Any]]:
        def guarded(item):
            try:
                return function(item)
            except Exception as exc:
                logger.warning(f"batch row {item} failed: {exc}")
                return ErrorHandler.from_exception(exc)

        if self.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                return list(executor.map(guarded, items))
        return [guarded(item) for item in items]

    # -- renormalization maps -------------------------------------------------

    def _window(self, default: Tuple[float, float]) -> np.ndarray:
        lo, hi = self.config.get('window') or default
        return np.linspace(float(lo), float(hi), self.config.get('points') or CURVE_POINTS)

    def fit_map(self) -> CommandOutput:
        spec = model_from_config(self.config)
        built = self.maps.build(spec)
        rmap = built.map
        xs = self._window(rmap.validity_interval)
        values = renorm.eval_map(rmap, xs)
        slopes = renorm.eval_map_derivative(rmap, xs)
        reference = _target_or_none(rmap.target, xs)

        report: Dict[str, Any] = {
            'label': rmap.label(),
            'map': rmap.to_dict(),
            'validity_interval': list(rmap.validity_interval),
            'window': [float(xs[0]), float(xs[-1])],
            'max_abs_error_on_window': _max_abs_error(values, reference),
        }
        if spec.interval is not None:
            report['l2_error'] = renorm.l2_error(rmap, spec.interval)
        if built.fit is not None:
            diagnostics = built.fit.to_dict()
            for key in ('family', 'target', 'params', 'coeffs'):
                diagnostics.pop(key)
            report['fit'] = diagnostics
            report['moment_check'] = built.problem.moment_check

        rows = [[x, v, d, r] for x, v, d, r in zip(xs, values, slopes, reference)]
        return CommandOutput(
            label=rmap.label(),
            tables=[Table('curve', ['x', 'map', 'map_derivative', 'target'], rows)],
            reports={'map': report},
        )

    def compare_maps(self) -> CommandOutput:
        K = int(self.config['K'])
        degree = 2 * K + 1
        interval = tuple(self.config.get('interval') or DEFAULT_COMPARE_INTERVAL[self.target])
        x0 = self.config.get('x0')
        if x0 is None:
            x0 = 0.0 if self.target is TargetFunction.BOLTZMANN_SHANNON else 0.5 * (interval[0] + interval[1])

        specs = []
        if self.target is TargetFunction.BOLTZMANN_SHANNON:
            specs.append(ModelSpec(MapFamily.PHI_DIVERGENCE, degree))
        specs.append(ModelSpec(MapFamily.TAYLOR, K, x0=x0))
        specs.append(ModelSpec(MapFamily.OPTIMIZED, K, interval=interval))
        maps = [self.maps.build(spec).map for spec in specs]

        width = interval[1] - interval[0]
        xs = self._window((interval[0] - 0.5 * width, interval[1] + 0.5 * width))
        reference = _target_or_none(self.target, xs)
        columns = [renorm.eval_map(rmap, xs) for rmap in maps]

        summary = {}
        for rmap, values in zip(maps, columns):
            summary[rmap.label()] = {
                'max_abs_error_on_window': _max_abs_error(values, reference),
                'l2_error_on_interval': renorm.l2_error(rmap, interval),
            }
        rows = [[x, r, *[float(c[i]) for c in columns]] for i, (x, r) in enumerate(zip(xs, reference))]
        return CommandOutput(
            label=f"compare_{degree}",
            tables=[Table('comparison', ['x', 'target', *[m.label() for m in maps]], rows)],
            reports={'summary': {'target': self.target.value, 'interval': list(interval), 'x0': x0, 'maps': summary}},
        )

    def _table_interval(self, L: float) -> Tuple[float, float]:
        if self.target is TargetFunction.BOSE_EINSTEIN:
            return (-L, -1.0 / L)
        return (-L, L)

    def error_table(self) -> CommandOutput:
        Ks = [int(k) for k in (self.config.get('Ks') or DEFAULT_TABLE_K)]
        Ls = [float(v) for v in (self.config.get('Ls') or DEFAULT_TABLE_L[self.target])]
        items = [(K, L) for L in Ls for K in Ks]
        # one problem per row; fits inside a row stay single-threaded
        problems = {item: ModelSpec(MapFamily.OPTIMIZED, item[0], interval=self._table_interval(item[1]))
                    for item in items}

        def row(item):
            spec = problems[item]
            built = self.maps.build(spec, workers=1)
            return ErrorHandler.success(spec.label(), {
                'l2_error': renorm.l2_error(built.map, spec.interval),
                'objective': built.fit.objective,
                'converged_starts': built.fit.converged_starts,
            })

        results = self._batch(row, items)
        rows = []
        for (K, L), result in zip(items, results):
            a, b = self._table_interval(L)
            data = result.get('data', {})
            rows.append([
                self.target.value, K, L, a, b,
                data.get('l2_error'), data.get('objective'), data.get('converged_starts'),
                'ok' if result['success'] else 'failed', result.get('error', ''),
            ])
        failed = sum(1 for r in results if not r['success'])
        headers = ['target', 'K', 'L', 'a', 'b', 'l2_error', 'objective', 'converged_starts', 'status', 'error']
        return CommandOutput(
            label=f"error_table_{self.target.value}",
            tables=[Table('error_table', headers, rows)],
            reports={'summary': {'rows': len(rows), 'failed_rows': failed}},
        )

    # -- moment inversion -----------------------------------------------------

    def _inversion_setup(self, rmap: RenormalizationMap, N: int):
        basis = sphere.build_basis(N)
        exactness = self.config.get('exactness') or closure.required_exactness(rmap, N)
        rule = sphere.build_quadrature(exactness, self.config.get('lebedev') or None)
        return basis, rule

    def _closure_moments(self, rmap, lam, basis, rule) -> Dict[str, Any]:
        sigma = self.config.get('sigma')
        sigma = DEFAULT_SIGMA if sigma is None else sigma
        flux, collision = closure.flux_and_collision_moments(rmap, lam, basis, rule, sigma)
        return {'sigma': sigma, 'flux': [f.to_list() for f in flux], 'collision': collision.to_list()}

    def _invert_dirac(self, directions) -> CommandOutput:
        N = int(self.config['N'])
        rmap = self.maps.build(model_from_config(self.config)).map
        label = rmap.label(N)
        basis, rule = self._inversion_setup(rmap, N)
        U = closure.dirac_moments(basis, directions)
        report = closure.invert(rmap, U, basis, rule, tol=self.tol, max_iter=self.max_iter)
        recon = closure.reconstruct(rmap, report.lam, basis)
        theta, phi, values, nodes = closure.sample_latlong(recon)
        peak, low = int(np.argmax(values)), int(np.argmin(values))

        summary = {
            'label': label,
            'N': N,
            'directions': [list(d) for d in directions],
            'moments': U.to_list(),
            'inversion': report.to_dict(),
            'peak_value': float(values[peak]),
            'peak_location': _direction_record(theta[peak], phi[peak], nodes[peak]),
            'min_value': float(values[low]),
            'min_location': _direction_record(theta[low], phi[low], nodes[low]),
            'values_at_beams': np.atleast_1d(recon(np.asarray(directions))).tolist(),
            'quadrature': rule.describe(),
        }
        if report.converged:
            summary['closure'] = self._closure_moments(rmap, report.lam, basis, rule)

        output = CommandOutput(
            label=label,
            tables=[Table('reconstruction', ['theta_deg', 'phi_deg', 'value'],
                          [[t, p, v] for t, p, v in zip(theta, phi, values)])],
            reports={'summary': summary},
            quadrature=[rule.provenance],
        )
        if not report.converged:
            output.failure = inversion_failure(label, report)
        return output

    def invert_beam(self) -> CommandOutput:
        return self._invert_dirac(SINGLE_BEAM)

    def invert_double_beam(self) -> CommandOutput:
        if int(self.config['N']) < 2:
            raise ConfigurationError("double-beam inversion needs N >= 2")
        return self._invert_dirac(DOUBLE_BEAM)

    def _six_gaussian(self, rmap: RenormalizationMap, N: int):
        basis, rule = self._inversion_setup(rmap, N)
        moment_rule = sphere.build_quadrature(2 * N + SIX_GAUSSIAN_EXTRA_EXACTNESS)
        U = closure.intensity_moments(closure.six_gaussian_intensity, basis, moment_rule)
        report = closure.invert(rmap, U, basis, rule, tol=self.tol, max_iter=self.max_iter)
        recon = closure.reconstruct(rmap, report.lam, basis)
        l2 = closure.sphere_l2_error(closure.six_gaussian_intensity, recon,
                                     sphere.build_quadrature(SPHERE_L2_EXACTNESS))
        return basis, rule, U, report, recon, l2

    def invert_six_gaussian(self) -> CommandOutput:
        N = int(self.config['N'])
        rmap = self.maps.build(model_from_config(self.config)).map
        label = rmap.label(N)
        basis, rule, U, report, recon, l2 = self._six_gaussian(rmap, N)
        theta, phi, values, nodes = closure.sample_latlong(recon)
        exact = closure.six_gaussian_intensity(nodes)
        axis_values = np.atleast_1d(recon(closure.AXIS_DIRECTIONS))
        true_peak = float(closure.six_gaussian_intensity(closure.AXIS_DIRECTIONS[4])[0])

        summary = {
            'label': label,
            'N': N,
            'moments': U.to_list(),
            'inversion': report.to_dict(),
            'l2_error': l2,
            'true_peak': true_peak,
            'reconstruction_peak': float(np.max(values)),
            'axis_values': axis_values.tolist(),
            'overestimates_peak': bool(np.max(axis_values) > true_peak),
            'quadrature': rule.describe(),
        }
        output = CommandOutput(
            label=label,
            tables=[Table('reconstruction', ['theta_deg', 'phi_deg', 'value', 'exact'],
                          [[t, p, v, e] for t, p, v, e in zip(theta, phi, values, exact)])],
            reports={'summary': summary},
            quadrature=[rule.provenance],
        )
        if not report.converged:
            output.failure = inversion_failure(label, report)
        return output

    def error_decay(self) -> CommandOutput:
        labels = self.config.get('models') or DEFAULT_DECAY_MODELS[self.target]
        Ns = [int(n) for n in (self.config.get('Ns') or DEFAULT_DECAY_N)]

        built: Dict[str, Dict[str, Any]] = {}
        for text in labels:
            try:
                built[text] = ErrorHandler.success(text, self.maps.build(parse_model_label(text)).map)
            except Exception as exc:
                logger.warning(f"model {text} could not be built: {exc}")
                built[text] = ErrorHandler.from_exception(exc)

        items = [(text, N) for text in labels for N in Ns]

        def row(item):
            text, N = item
            if not built[text]['success']:
                return built[text]
            rmap = built[text]['data']
            _, rule, _, report, _, l2 = self._six_gaussian(rmap, N)
            return ErrorHandler.success(rmap.label(N), {
                'l2_error': l2,
                'converged': report.converged,
                'iterations': report.iterations,
                'residual_norm': report.residual_norm,
                'inversion_status': report.status,
                'quadrature': rule.provenance,
            })

        results = self._batch(row, items)
        rows, provenance = [], []
        for (text, N), result in zip(items, results):
            data = result.get('data', {})
            if data.get('quadrature') and data['quadrature'] not in provenance:
                provenance.append(data['quadrature'])
            rows.append([
                result.get('message', text), text, N, data.get('l2_error'), data.get('converged'),
                data.get('iterations'), data.get('inversion_status'),
                'ok' if result['success'] else 'failed', result.get('error', ''),
            ])
        headers = ['label', 'model', 'N', 'l2_error', 'converged', 'iterations', 'inversion_status', 'status', 'error']
        return CommandOutput(
            label=f"error_decay_{self.target.value}",
            tables=[Table('error_decay', headers, rows)],
            reports={'summary': {
                'rows': len(rows),
                'failed_rows': sum(1 for r in results if not r['success']),
                'models': list(labels),
            }},
            quadrature=provenance,
        )
