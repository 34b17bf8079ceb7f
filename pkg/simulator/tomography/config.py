"""
Run configuration: file parsing, preset merging and validation.

Layers are merged preset -> config file -> command line, validated with
the serializers in `tomography.serializers`, and turned into a fully
concrete `RunConfig` (turbulence waist calibrated, schedule and noise
resolved) before any trial starts.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass

from django.conf import settings

from . import __version__
from .exceptions import ConfigurationError
from .oracle import NoiseProfile
from .serializers import RunConfigSerializer
from .spsa import GainSchedule
from .turbulence import TurbulenceConfig, calibrated_config

logger = logging.getLogger(__name__)

DEFAULTS = {
    'dimension': 3,
    'regime': 'low-noise',
    'mode': 'sgqt-pure',
    'trials': 200,
    'iterations': 100,
    'master_seed': 0,
    'initial': 'haar',
    'mixed_rank': 2,
    'mixed_measure': 'bures',
}


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    regime: str
    mode: str
    trials: int
    iterations: int
    master_seed: int
    schedule: GainSchedule
    noise: NoiseProfile
    turbulence: TurbulenceConfig | None = None
    preset: str | None = None
    reference: str = 'prepared'
    initial: str = 'haar'
    mixed_rank: int = 2
    mixed_measure: str = 'bures'
    settings_per_objective: int | None = None
    loss_span: float = 0.2
    preset_version: str = '1'

    def as_dict(self):
        """JSON-ready echo of every resolved value."""
        echo = {
            name: getattr(self, name)
            for name in self.__dataclass_fields__
            if name not in ('schedule', 'noise', 'turbulence')
        }
        echo['schedule'] = asdict(self.schedule)
        noise = {k: v for k, v in self.noise.__dict__.items() if k != 'crosstalk'}
        noise['loss'] = list(noise['loss']) if noise['loss'] is not None else None
        echo['noise'] = noise
        echo['turbulence'] = asdict(self.turbulence) if self.turbulence else None
        echo['version'] = __version__
        return echo


def _nest(flat, source):
    tree = {}
    for key, value in flat.items():
        node = tree
        parts = key.split('.')
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"{source}: {key} conflicts with an earlier scalar value")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigurationError(f"{source}: {key} conflicts with an earlier section")
        node[parts[-1]] = value
    return tree


def parse_config_text(text, source='<config>'):
    """`key = value` lines with dotted keys and `#` comments, as a nested mapping of strings."""
    flat = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in flat:
            raise ConfigurationError(f"{source}:{lineno}: {key} given twice")
        flat[key] = None if value.lower() in ('', 'none', 'null') else value
    return _nest(flat, source)


def parse_config_file(path):
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigurationError(f"config: cannot read {path}: {exc.strerror}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigurationError(f"config: {path} is not UTF-8") from exc
    return parse_config_text(text, str(path))


def merge(base, *layers):
    merged = copy.deepcopy(base)
    for layer in layers:
        for key, value in (layer or {}).items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = merge(merged[key], value)
            else:
                merged[key] = copy.deepcopy(value)
    return merged


def flatten_errors(errors, prefix=''):
    """DRF's nested error dict as 'field.path: message' strings."""
    messages = []
    if isinstance(errors, dict):
        for key, value in errors.items():
            path = prefix if key == 'non_field_errors' else (f"{prefix}.{key}" if prefix else str(key))
            messages.extend(flatten_errors(value, path))
    elif isinstance(errors, list):
        for item in errors:
            messages.extend(flatten_errors(item, prefix))
    else:
        messages.append(f"{prefix or 'config'}: {errors}")
    return messages


def _unknown_keys(tree, serializer, prefix=''):
    unknown = []
    for key, value in tree.items():
        path = f"{prefix}.{key}" if prefix else key
        field = serializer.fields.get(key)
        if field is None:
            unknown.append(f"{path}: unknown setting")
        elif isinstance(value, dict) and hasattr(field, 'fields'):
            unknown.extend(_unknown_keys(value, field, path))
    return unknown


def preset_name(regime, dimension):
    if regime == 'high-noise':
        return 'high-noise-d20' if dimension >= 20 else 'high-noise-d3d5'
    if regime == 'custom':
        return None
    return regime


def _peek_int(value, default):
    try:
        return int(value)
    except (TypeError, ValueError):
        return default


def resolve_layers(file_layer=None, cli_layer=None, preset=None):
    """Merge defaults, the chosen preset, the file and the command line into one raw mapping."""
    user = merge(file_layer or {}, cli_layer or {})
    regime = user.get('regime', DEFAULTS['regime'])
    name = preset or user.get('preset') or preset_name(regime, _peek_int(user.get('dimension'), DEFAULTS['dimension']))
    presets = settings.TOMOGRAPHY_PRESETS
    if name is not None and name not in presets:
        raise ConfigurationError(f"preset: unknown preset {name!r}; choose from {', '.join(sorted(presets))}")
    layer = copy.deepcopy(presets[name]) if name else {}
    if user.get('mode', DEFAULTS['mode']) == 'sgqt-mixed':
        # Preset gains are tuned for the pure-state search.
        layer.pop('schedule', None)
    merged = merge(DEFAULTS, layer, user)
    merged['preset'] = name
    return merged


def validate(raw):
    serializer = RunConfigSerializer(data=raw)
    unknown = _unknown_keys(raw, serializer)
    if not serializer.is_valid() or unknown:
        raise ConfigurationError(unknown + flatten_errors(serializer.errors))
    return serializer.validated_data


def build_run_config(data):
    mode = data['mode']
    schedule_defaults = (
        settings.TOMOGRAPHY_MIXED_SCHEDULE if mode == 'sgqt-mixed' else settings.TOMOGRAPHY_DEFAULT_SCHEDULE
    )
    schedule = GainSchedule(**{**schedule_defaults, **dict(data.get('schedule') or {})})
    noise_fields = {k: v for k, v in dict(data.get('noise') or {}).items()}
    if noise_fields.get('copies_per_setting') is not None:
        noise_fields.pop('rate_hz', None)
    noise = NoiseProfile(**noise_fields)
    turbulence = None
    if data.get('turbulence') is not None:
        if mode == 'sgqt-mixed':
            raise ConfigurationError("turbulence: mixed true states are not supported under turbulence")
        turbulence = TurbulenceConfig(**dict(data['turbulence']))
    reference = data.get('reference') or ('apparent' if mode == 'compare' else 'prepared')
    return RunConfig(
        dimension=data['dimension'],
        regime=data['regime'],
        mode=mode,
        trials=data['trials'],
        iterations=data['iterations'],
        master_seed=data['master_seed'],
        schedule=schedule,
        noise=noise,
        turbulence=turbulence,
        preset=data.get('preset'),
        reference=reference,
        initial=data.get('initial', 'haar'),
        mixed_rank=data.get('mixed_rank', 2),
        mixed_measure=data.get('mixed_measure', 'bures'),
        settings_per_objective=data.get('settings_per_objective'),
        loss_span=dict(data.get('compare') or {}).get('loss_span', settings.TOMOGRAPHY_COMPARE_LOSS_SPAN),
        preset_version=settings.TOMOGRAPHY_PRESET_VERSION,
    )


def resolve_turbulence(cfg):
    """Fill in a calibrated beam waist when the config leaves it unset."""
    if cfg.turbulence is None or cfg.turbulence.beam_waist_m is not None:
        return cfg
    turbulence = calibrated_config(
        cfg.turbulence,
        settings.TOMOGRAPHY_CALIBRATION_SEED,
        settings.TOMOGRAPHY_CALIBRATION_SCREENS,
        order=cfg.dimension,
    )
    return RunConfig(**{**cfg.__dict__, 'turbulence': turbulence})


def load_run_config(path=None, preset=None, overrides=None):
    """Concrete RunConfig from an optional file, an optional preset name and command-line overrides."""
    file_layer = parse_config_file(path) if path else {}
    cli_layer = _nest({k: v for k, v in (overrides or {}).items() if v is not None}, 'command line')
    raw = resolve_layers(file_layer, cli_layer, preset)
    try:
        cfg = build_run_config(validate(raw))
        cfg = resolve_turbulence(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"config: {exc}") from exc
    logger.info("run config: d=%d, %s, preset %s, %d trials", cfg.dimension, cfg.mode, cfg.preset, cfg.trials)
    return cfg
