"""Plain-text run configuration.

Files are flat ``section.key = value`` lines; ``#`` starts a comment and
blank lines are ignored. Every key must be known — typos fail loudly rather
than silently running with defaults. Command-line flags override file
values, and the fully resolved configuration is echoed at the start of
every run so results are reproducible from logs alone.
"""

from __future__ import annotations

from .correct import GammaConfig
from .errors import ConfigError
from .pipeline import PipelineConfig
from .resample import ResampleConfig

_BOOL = {"true": True, "false": False, "1": True, "0": False}

#: known keys and their parsers
_SCHEMA = {
    "pipeline.steps": int,
    "pipeline.scale": int,
    "pipeline.fov_deg": float,
    "pipeline.tp_resolution": int,
    "pipeline.denoiser": str,
    "pipeline.seed": int,
    "pipeline.init_noise_sigma": float,
    "pipeline.dump_every": int,
    "pipeline.dump_dir": str,
    "gamma.p": float,
    "gamma.e": float,
    "gamma.l": float,
    "resample.kernel": str,
    "resample.preup_erp": int,
    "resample.preup_tp": int,
    "resample.blend": str,
    "resample.blend_power": float,
    "denoiser.lam_max": float,
    "denoiser.iters": int,
    "denoiser.endpoint": str,
    "denoiser.timeout": float,
}


def parse_config_text(text: str) -> dict:
    """Parse ``section.key = value`` lines into a typed flat dict."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _SCHEMA[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


def build_pipeline_config(values: dict, overrides: dict | None = None) -> PipelineConfig:
    """Assemble a PipelineConfig from file values plus flag overrides.

    ``overrides`` uses the same flat keys; None values are ignored so unset
    CLI flags fall through to the file (and then to defaults).
    """
    merged = dict(values)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = val

    def take(key, default):
        return merged.pop(key, default)

    gammas = GammaConfig(
        gamma_p=take("gamma.p", 1.0),
        gamma_e=take("gamma.e", 1.0),
        gamma_l=take("gamma.l", 0.5),
    )
    resample_defaults = ResampleConfig(kernel="bicubic", preup_erp=4, preup_tp=4)
    resample = ResampleConfig(
        kernel=take("resample.kernel", resample_defaults.kernel),
        preup_erp=take("resample.preup_erp", resample_defaults.preup_erp),
        preup_tp=take("resample.preup_tp", resample_defaults.preup_tp),
        blend=take("resample.blend", resample_defaults.blend),
        blend_power=take("resample.blend_power", resample_defaults.blend_power),
    )
    denoiser_opts = {}
    for key, opt in (
        ("denoiser.lam_max", "lam_max"),
        ("denoiser.iters", "iters"),
        ("denoiser.endpoint", "endpoint"),
        ("denoiser.timeout", "timeout"),
    ):
        if key in merged:
            denoiser_opts[opt] = merged.pop(key)
    cfg = PipelineConfig(
        total_steps=take("pipeline.steps", 200),
        gammas=gammas,
        scale=take("pipeline.scale", 4),
        fov_deg=take("pipeline.fov_deg", 100.0),
        tp_resolution=take("pipeline.tp_resolution", None),
        resample=resample,
        denoiser=take("pipeline.denoiser", "tv"),
        denoiser_opts=denoiser_opts,
        seed=take("pipeline.seed", 0),
        init_noise_sigma=take("pipeline.init_noise_sigma", 0.0),
        dump_every=take("pipeline.dump_every", 0),
        dump_dir=take("pipeline.dump_dir", None),
    )
    if merged:
        raise ConfigError(f"unused config keys: {sorted(merged)}")
    return cfg


def resolved_text(cfg: PipelineConfig) -> str:
    """Render a PipelineConfig back into config-file syntax for echoing."""
    lines = [
        f"pipeline.steps = {cfg.total_steps}",
        f"pipeline.scale = {cfg.scale}",
        f"pipeline.fov_deg = {cfg.fov_deg}",
        f"pipeline.denoiser = {cfg.denoiser}",
        f"pipeline.seed = {cfg.seed}",
        f"pipeline.init_noise_sigma = {cfg.init_noise_sigma}",
        f"pipeline.dump_every = {cfg.dump_every}",
        f"gamma.p = {cfg.gammas.gamma_p}",
        f"gamma.e = {cfg.gammas.gamma_e}",
        f"gamma.l = {cfg.gammas.gamma_l}",
        f"resample.kernel = {cfg.resample.kernel}",
        f"resample.preup_erp = {cfg.resample.preup_erp}",
        f"resample.preup_tp = {cfg.resample.preup_tp}",
        f"resample.blend = {cfg.resample.blend}",
        f"resample.blend_power = {cfg.resample.blend_power}",
    ]
    if cfg.tp_resolution:
        lines.insert(2, f"pipeline.tp_resolution = {cfg.tp_resolution}")
    if cfg.dump_dir:
        lines.append(f"pipeline.dump_dir = {cfg.dump_dir}")
    for opt, key in (
        ("lam_max", "denoiser.lam_max"),
        ("iters", "denoiser.iters"),
        ("endpoint", "denoiser.endpoint"),
        ("timeout", "denoiser.timeout"),
    ):
        if opt in cfg.denoiser_opts:
            lines.append(f"{key} = {cfg.denoiser_opts[opt]}")
    return "\n".join(lines)


def roundtrip_config(cfg: PipelineConfig) -> PipelineConfig:
    """Parse the echoed text back; must reproduce the config (tested)."""
    return build_pipeline_config(parse_config_text(resolved_text(cfg)))


__all__ = [
    "parse_config_text",
    "load_config",
    "build_pipeline_config",
    "resolved_text",
    "roundtrip_config",
]
