"""Run configuration: one INI file drives every pipeline stage.

Defaults reproduce the reference experiment wholesale (box half-width
5, depth 2, six sources on [0.1, 0.6], 50x50 detector raster at depth
14, k = 8.51, lambda = 1.1, N = 4, gamma1 = 0.1 with 1e-10 stops,
data truncation 0.4, coefficient truncation 0.2), so an empty file is
a valid configuration.  Unknown sections or keys are rejected by name
rather than silently ignored; stage paths are kept relative to a
single output directory so a run is self-contained.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "load_config",
    "config_text",
    "with_overrides",
]


class ConfigError(ValueError):
    pass


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _parse_triple(s):
    parts = [p for p in s.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ConfigError(f"expected three numbers, got {s!r}")
    return tuple(float(p) for p in parts)


def _parse_opt_float(s):
    s = s.strip()
    return None if not s else float(s)


@dataclass(frozen=True)
class PipelineConfig:
    # [domain]
    R: float = 5.0
    b: float = 2.0
    theta: float = 2.5
    # [sources]
    d: float = 9.0
    a1: float = 0.1
    a2: float = 0.6
    step: float = 0.1
    # [measurement]
    z_meas: float = -14.0
    half_width: float = 5.0
    n_detectors: int = 50
    # [grid]
    Z_h: int = 50
    h0: float = 0.05
    # [constants]
    eta0: float = 377.0
    c_scaled: float = 2997924580.0
    # [target]
    target_kind: str = "box"
    target_center: tuple = (0.0, 0.0, -1.0)
    target_side: float = 1.0
    target_c: float = 10.0
    target_sigma: float = 0.5
    # [forward]
    k: float = 8.51
    frequency_hz: float | None = None
    forward_tol: float = 1e-8
    max_born: int = 25
    gmres_restart: int = 50
    gmres_maxiter: int = 300
    # [noise]
    noise_delta: float = 0.0
    seed: int = 12345
    # [preprocess]
    data_kappa1: float = 0.4
    smooth_sigma: float = 1.0
    smooth_window: int = 5
    pad_factor: int = 2
    # [inversion]
    N: int = 4
    lam: float = 1.1
    gamma1: float = 0.1
    gamma_min: float = 1e-10
    dj_min: float = 1e-10
    max_steps: int = 5000
    mode: str = "descent"
    ball_M: float | None = None
    checkpoint_every: int = 0
    # [extract]
    coef_kappa1: float = 0.2
    iso_fraction: float = 0.1
    # [paths]
    outdir: str = "run"
    sweep_raw: str = "sweep_raw.dat"
    sweep_prep: str = "sweep_prep.dat"
    lifted: str = "lifted.dat"
    invert_log: str = "invert_log.csv"
    report: str = "run_report.txt"
    volume_prefix: str = "volume"
    # [stages]
    do_simulate: bool = True
    do_preprocess: bool = True
    do_invert: bool = True
    do_extract: bool = True

    extras: dict = field(default_factory=dict, compare=False)

    def path(self, name):
        """Resolve a stage artifact inside the output directory."""
        return Path(self.outdir) / getattr(self, name)


# (section, key) -> (attribute, parser).  The INI surface is the
# contract; attribute names are an internal detail.
_SCHEMA = {
    ("domain", "R"): ("R", float),
    ("domain", "b"): ("b", float),
    ("domain", "theta"): ("theta", float),
    ("sources", "d"): ("d", float),
    ("sources", "a1"): ("a1", float),
    ("sources", "a2"): ("a2", float),
    ("sources", "step"): ("step", float),
    ("measurement", "z_meas"): ("z_meas", float),
    ("measurement", "half_width"): ("half_width", float),
    ("measurement", "n_detectors"): ("n_detectors", int),
    ("grid", "Z_h"): ("Z_h", int),
    ("grid", "h0"): ("h0", float),
    ("constants", "eta0"): ("eta0", float),
    ("constants", "c_scaled"): ("c_scaled", float),
    ("target", "kind"): ("target_kind", str),
    ("target", "center"): ("target_center", _parse_triple),
    ("target", "side"): ("target_side", float),
    ("target", "c"): ("target_c", float),
    ("target", "sigma"): ("target_sigma", float),
    ("forward", "k"): ("k", float),
    ("forward", "frequency_hz"): ("frequency_hz", _parse_opt_float),
    ("forward", "tol"): ("forward_tol", float),
    ("forward", "max_born"): ("max_born", int),
    ("forward", "gmres_restart"): ("gmres_restart", int),
    ("forward", "gmres_maxiter"): ("gmres_maxiter", int),
    ("noise", "delta"): ("noise_delta", float),
    ("noise", "seed"): ("seed", int),
    ("preprocess", "kappa1"): ("data_kappa1", float),
    ("preprocess", "smooth_sigma"): ("smooth_sigma", float),
    ("preprocess", "smooth_window"): ("smooth_window", int),
    ("preprocess", "pad_factor"): ("pad_factor", int),
    ("inversion", "N"): ("N", int),
    ("inversion", "lambda"): ("lam", float),
    ("inversion", "gamma1"): ("gamma1", float),
    ("inversion", "gamma_min"): ("gamma_min", float),
    ("inversion", "dj_min"): ("dj_min", float),
    ("inversion", "max_steps"): ("max_steps", int),
    ("inversion", "mode"): ("mode", str),
    ("inversion", "M"): ("ball_M", _parse_opt_float),
    ("inversion", "checkpoint_every"): ("checkpoint_every", int),
    ("extract", "kappa1"): ("coef_kappa1", float),
    ("extract", "iso_fraction"): ("iso_fraction", float),
    ("paths", "outdir"): ("outdir", str),
    ("paths", "sweep_raw"): ("sweep_raw", str),
    ("paths", "sweep_prep"): ("sweep_prep", str),
    ("paths", "lifted"): ("lifted", str),
    ("paths", "invert_log"): ("invert_log", str),
    ("paths", "report"): ("report", str),
    ("paths", "volume_prefix"): ("volume_prefix", str),
    ("stages", "simulate"): ("do_simulate", _parse_bool),
    ("stages", "preprocess"): ("do_preprocess", _parse_bool),
    ("stages", "invert"): ("do_invert", _parse_bool),
    ("stages", "extract"): ("do_extract", _parse_bool),
}

_ATTR_TO_KEY = {attr: sk for sk, (attr, _) in _SCHEMA.items()}


def load_config(path=None, overrides=()) -> PipelineConfig:
    """Read an INI file (optional) and apply section.key=value overrides.

    Any section or key outside the schema raises ConfigError naming the
    offender; values that fail to parse name both the key and the raw
    string.
    """
    values = {}

    def put(section, key, raw):
        sk = (section, key)
        if sk not in _SCHEMA:
            raise ConfigError(f"unknown configuration key [{section}] {key}")
        attr, parse = _SCHEMA[sk]
        try:
            values[attr] = parse(raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc

    if path is not None:
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keys are case-sensitive (Z_h, R, ...)
        read = cp.read(str(path))
        if not read:
            raise ConfigError(f"configuration file not found: {path}")
        for section in cp.sections():
            for key, raw in cp.items(section):
                put(section, key, raw)

    for item in overrides:
        head, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        section, dot, key = head.strip().partition(".")
        if not dot:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        put(section.strip(), key.strip(), raw.strip())

    return PipelineConfig(**values)


def config_text(config: PipelineConfig):
    """Render the full parameter set back as INI (report embedding)."""
    sections = {}
    for f in fields(config):
        if f.name == "extras":
            continue
        section, key = _ATTR_TO_KEY[f.name]
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ", ".join(f"{v:g}" for v in value)
        elif value is None:
            value = ""
        elif isinstance(value, bool):
            value = "true" if value else "false"
        sections.setdefault(section, []).append(f"{key} = {value}")
    out = []
    for section, lines in sections.items():
        out.append(f"[{section}]")
        out.extend(lines)
        out.append("")
    return "\n".join(out)


def with_overrides(config: PipelineConfig, **attrs) -> PipelineConfig:
    """Dataclass replace with attribute-name validation."""
    for name in attrs:
        if name not in _ATTR_TO_KEY:
            raise ConfigError(f"unknown configuration attribute {name!r}")
    return replace(config, **attrs)
