"""
Run configuration: ``settings.MIXEDFLOW_DEFAULTS`` overlaid by a YAML run
file, then by command-line overrides.
"""

import copy
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import yaml
from django.conf import settings

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

PRESETS = ('manufactured', 'small', 'absurd')
FORCINGS = ('random', 'zero')


@dataclass(frozen=True)
class GeometryConfig:
    length: float
    height: float
    nx: int
    ny: int
    grading: float = 1.0
    refine: int = 0


@dataclass(frozen=True)
class TimeConfig:
    t_end: float
    intervals: int
    gauss_points: int = 4


@dataclass(frozen=True)
class NewtonConfig:
    max_iters: int
    abs_tol: float
    damping: float
    linear_tol: float


@dataclass(frozen=True)
class ExperimentConfig:
    forcing: str
    amplitude: float
    target_norm: float
    scales: tuple
    trials: int
    preset: str


@dataclass(frozen=True)
class CornerConfig:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_contour: int
    grid_re: int
    grid_im: int
    fit_delta: float


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig
    n_modes: int
    time: TimeConfig
    newton: NewtonConfig
    experiment: ExperimentConfig
    corner: CornerConfig
    seed: int
    output: str

    def as_dict(self):
        data = asdict(self)
        data['experiment']['scales'] = list(data['experiment']['scales'])
        return data

    @property
    def output_dir(self):
        return Path(self.output)


def deep_merge(base, override):
    """Recursive dict merge; ``override`` wins, unknown keys are errors."""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if key not in merged:
            raise ConfigError(f"Unknown configuration key {key!r}")
        if isinstance(merged[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"Configuration section {key!r} must be a mapping")
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _number(section, key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
    return kind(value)


def _require(condition, message):
    if not condition:
        raise ConfigError(message)


def _build(data):
    try:
        g = data['geometry']
        geometry = GeometryConfig(
            length=_number('geometry', 'length', g['length']),
            height=_number('geometry', 'height', g['height']),
            nx=_number('geometry', 'nx', g['nx'], int),
            ny=_number('geometry', 'ny', g['ny'], int),
            grading=_number('geometry', 'grading', g['grading']),
            refine=_number('geometry', 'refine', g['refine'], int),
        )
        t = data['time']
        time = TimeConfig(
            t_end=_number('time', 't_end', t['t_end']),
            intervals=_number('time', 'intervals', t['intervals'], int),
            gauss_points=_number('time', 'gauss_points', t['gauss_points'], int),
        )
        n = data['newton']
        newton = NewtonConfig(
            max_iters=_number('newton', 'max_iters', n['max_iters'], int),
            abs_tol=_number('newton', 'abs_tol', n['abs_tol']),
            damping=_number('newton', 'damping', n['damping']),
            linear_tol=_number('newton', 'linear_tol', n['linear_tol']),
        )
        e = data['experiment']
        scales = e['scales']
        _require(isinstance(scales, (list, tuple)) and scales, "experiment.scales must be a non-empty list")
        experiment = ExperimentConfig(
            forcing=str(e['forcing']),
            amplitude=_number('experiment', 'amplitude', e['amplitude']),
            target_norm=_number('experiment', 'target_norm', e['target_norm']),
            scales=tuple(_number('experiment', 'scales', s) for s in scales),
            trials=_number('experiment', 'trials', e['trials'], int),
            preset=str(e['preset']),
        )
        c = data['corner']
        corner = CornerConfig(**{
            key: _number('corner', key, c[key], int if key in ('n_contour', 'grid_re', 'grid_im') else float)
            for key in ('re_min', 're_max', 'im_min', 'im_max', 'n_contour', 'grid_re', 'grid_im', 'fit_delta')
        })
        config = RunConfig(
            geometry=geometry,
            n_modes=_number('', 'n_modes', data['n_modes'], int),
            time=time,
            newton=newton,
            experiment=experiment,
            corner=corner,
            seed=_number('', 'seed', data['seed'], int),
            output=str(data['output']),
        )
    except KeyError as exc:
        raise ConfigError(f"Missing configuration key {exc}") from exc
    validate(config)
    return config


def validate(config):
    g, t, n, e, c = config.geometry, config.time, config.newton, config.experiment, config.corner
    _require(g.length > 0 and g.height > 0, "geometry.length and geometry.height must be positive")
    _require(g.nx >= 1 and g.ny >= 1, "geometry.nx and geometry.ny must be at least 1")
    _require(g.grading >= 1, "geometry.grading must be >= 1")
    _require(g.refine >= 0, "geometry.refine must be >= 0")
    _require(1 <= config.n_modes <= 400, "n_modes must lie in [1, 400]")
    _require(t.t_end > 0, "time.t_end must be positive")
    _require(t.intervals >= 1, "time.intervals must be at least 1")
    _require(1 <= t.gauss_points <= 8, "time.gauss_points must lie in [1, 8]")
    _require(n.max_iters >= 1, "newton.max_iters must be at least 1")
    _require(n.abs_tol > 0 and n.linear_tol > 0, "newton tolerances must be positive")
    _require(0 < n.damping <= 1, "newton.damping must lie in (0, 1]")
    _require(e.forcing in FORCINGS, f"experiment.forcing must be one of {', '.join(FORCINGS)}")
    _require(e.trials >= 0, "experiment.trials must be >= 0")
    _require(e.target_norm > 0, "experiment.target_norm must be positive")
    _require(all(s >= 0 for s in e.scales), "experiment.scales must be non-negative")
    _require(e.preset in PRESETS, f"experiment.preset must be one of {', '.join(PRESETS)}")
    _require(c.re_min < c.re_max and c.im_min < c.im_max, "corner rectangle is degenerate")
    _require(c.n_contour >= 8 and c.grid_re >= 2 and c.grid_im >= 2, "corner sampling too coarse")
    _require(c.fit_delta > 0, "corner.fit_delta must be positive")
    _require(config.seed >= 0, "seed must be non-negative")


def read_run_file(path):
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"Cannot read run file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Run file {path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Run file {path} must contain a mapping")
    return data


def load_run_config(path=None, overrides=None):
    """Defaults, then the run file at ``path``, then ``overrides``."""
    data = copy.deepcopy(settings.MIXEDFLOW_DEFAULTS)
    if path:
        data = deep_merge(data, read_run_file(path))
    data = deep_merge(data, overrides or {})
    config = _build(data)
    logger.debug("Run configuration: %s", config)
    return config


def dump_yaml(data):
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=False)
