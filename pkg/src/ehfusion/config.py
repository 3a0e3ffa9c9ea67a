"""Flat ``key = value`` experiment files.

Layout::

    # comment
    [network]
    n = 10
    subspace_dim = 3

    [control]
    algorithm = alg3

Keys may also appear before the first section header. Unknown keys, keys
under the wrong section, duplicates and unparsable values are rejected with
a message naming the key and line. Missing keys take the defaults of
:class:`~ehfusion.simulation.ExperimentConfig`.
"""
from __future__ import annotations

import dataclasses
import os

from .errors import InvalidArgument
from .simulation import ExperimentConfig

SECTIONS = {
    "network": ("n", "radius_m", "kernel_variance", "subspace_dim"),
    "signal": ("worst_bmse_db", "noise_var", "amplitude"),
    "radio": ("noise_psd", "noise_figure", "system_const", "slot_s", "ber", "carrier_hz",
              "max_bits", "percentile", "fading"),
    "energy": ("arrival", "r_max", "window_s", "overhead_frac", "b0_frac"),
    "control": ("algorithm", "v", "theta_mode", "gradient_bound", "theta", "gamma_db", "mu",
                "vartheta", "z0_max", "descent_max_iters", "descent_tol",
                "descent_multistart"),
    "sim": ("horizon", "burn_in", "trials", "seed", "topology_seed"),
}
SECTION_OF = {key: sec for sec, keys in SECTIONS.items() for key in keys}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class ConfigError(InvalidArgument):
    """Malformed configuration; ``key`` and ``line`` locate the problem."""

    def __init__(self, message, *, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


def _default_types():
    cfg = ExperimentConfig()
    return {f.name: type(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)}


def _convert(raw: str, kind, key, line):
    if kind is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}", key=key, line=line)
    try:
        if kind is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"expected {kind.__name__}, got {raw!r}", key=key, line=line) from None
    return raw


def parse_config_text(text: str) -> ExperimentConfig:
    types = _default_types()
    values, lines = {}, {}
    section = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]; expected one of "
                                  f"{', '.join(SECTIONS)}", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError("unknown key", key=key, line=lineno)
        if section is not None and SECTION_OF[key] != section:
            raise ConfigError(f"belongs in [{SECTION_OF[key]}], not [{section}]",
                              key=key, line=lineno)
        if key in values:
            raise ConfigError(f"duplicate (first set on line {lines[key]})", key=key, line=lineno)
        if not raw:
            raise ConfigError("missing value", key=key, line=lineno)
        values[key] = _convert(raw, types[key], key, lineno)
        lines[key] = lineno
    try:
        return ExperimentConfig(**values)
    except InvalidArgument as exc:
        # validate() messages start with the offending key
        key = str(exc).split(":", 1)[0]
        raise ConfigError(str(exc).split(":", 1)[-1].strip(), key=key,
                          line=lines.get(key)) from None


def parse_config(path) -> ExperimentConfig:
    """Read a configuration file; IO errors propagate as ``OSError``."""
    with open(os.fspath(path), encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def emit_config(config: ExperimentConfig) -> str:
    """Serialize every field; ``parse_config_text(emit_config(c)) == c``."""
    out = []
    for section, keys in SECTIONS.items():
        out.append(f"[{section}]")
        out.extend(f"{key} = {_format(getattr(config, key))}" for key in keys)
        out.append("")
    return "\n".join(out)
