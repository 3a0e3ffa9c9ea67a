"""Named sweeps that mirror the figures, plus CSV output.

Each preset sweeps one config key over a few values, optionally for several
curves (``series``). Every swept point writes one CSV with all trials stacked
(``slot`` restarts at 0 for each trial), and each curve writes one summary
CSV whose rows are recomputable from the point files and ``burn_in``.

Energies in presets are in units of the mean e_max (see ``simulation``).
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .config import emit_config
from .errors import InvalidArgument
from .simulation import ExperimentConfig, MetricsTrace, build_setup, run_monte_carlo

SUMMARY_COLUMNS = ("sweep_value", "bmse_mean", "bmse_std", "active_mean", "energy_mean_j",
                   "battery_mean_j")

_DESK = dict(n=10, subspace_dim=3, horizon=10_000, burn_in=5_000, trials=10)
_FULL = dict(n=50, subspace_dim=6, horizon=10_000, burn_in=9_900, trials=50)

# Shared settings for the energy-minimizing controllers. V stays below
# R_max - e_o so idle nodes can wake up on battery surplus alone.
_ALG23 = dict(r_max=4.0, vartheta=20.0, mu=1e4, z0_max=1.0)


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    sweep_key: str
    sweep_values: tuple
    overrides: dict = field(default_factory=dict)
    series: tuple = ((None, {}),)  # (label, overrides) per curve
    desk: dict = field(default_factory=dict)  # extra desk-scale overrides
    full: dict = field(default_factory=dict)
    full_sweep: tuple | None = None

    def points(self, scale="desk", seed=None):
        """Yield ``(series_label, sweep_value, config)`` for every run."""
        if scale not in ("desk", "full"):
            raise InvalidArgument(f"scale must be 'desk' or 'full', got {scale!r}")
        base = dict(_DESK if scale == "desk" else _FULL)
        base.update(self.overrides)
        base.update(self.desk if scale == "desk" else self.full)
        if seed is not None:
            base["seed"] = int(seed)
        values = self.full_sweep if scale == "full" and self.full_sweep else self.sweep_values
        for label, extra in self.series:
            for value in values:
                cfg = ExperimentConfig(**{**base, **extra, self.sweep_key: value})
                yield label, value, cfg


def _p(name, description, sweep_key, sweep_values, **kw):
    return Preset(name=name, description=description, sweep_key=sweep_key,
                  sweep_values=tuple(sweep_values), **kw)


_R_SERIES = tuple((f"rmax{r:g}", {"r_max": r}) for r in (1.0, 2.0, 4.0))
_ALG_GAMMA_SERIES = tuple(
    (f"{alg}_g{abs(g):g}", {"algorithm": alg, "gamma_db": g})
    for alg in ("alg2", "alg3") for g in (-12.0, -15.0)
)
_V_ALG1 = (1.0, 10.0, 100.0, 1e3, 1e4)
_V_ALG23 = (0.25, 0.5, 1.0, 2.0)
_ALG2_DESK = dict(horizon=4_000, burn_in=2_000, trials=3)

PRESETS = {p.name: p for p in (
    _p("fig1_bmse_vs_v", "Alg. 1: BMSE versus V for several R_max",
       "v", _V_ALG1, overrides=dict(algorithm="alg1"), series=_R_SERIES,
       full_sweep=(1e-2, 1.0, 1e2, 1e4, 1e6)),
    _p("fig2_active_vs_v", "Alg. 1: active nodes versus V for several R_max",
       "v", _V_ALG1, overrides=dict(algorithm="alg1"), series=_R_SERIES,
       full_sweep=(1e-2, 1.0, 1e2, 1e4, 1e6)),
    _p("fig3_battery_vs_v", "Alg. 1: mean battery level versus V",
       "v", _V_ALG1, overrides=dict(algorithm="alg1", r_max=2.5),
       full_sweep=(1e-2, 1.0, 1e2, 1e4, 1e6)),
    _p("fig4_onoff", "Alg. 1: BMSE over time under ON/OFF harvesting",
       "v", (1e-4,), overrides=dict(algorithm="alg1", arrival="on_off", r_max=5.0,
                                    window_s=1.0, burn_in=0)),
    _p("fig5_energy_vs_v", "Algs. 2/3: network energy versus V for several targets",
       "v", _V_ALG23, overrides=dict(_ALG23), series=_ALG_GAMMA_SERIES, desk=_ALG2_DESK),
    _p("fig6_active_vs_v_g", "Algs. 2/3: active nodes versus V for several targets",
       "v", _V_ALG23, overrides=dict(_ALG23), series=_ALG_GAMMA_SERIES, desk=_ALG2_DESK),
    _p("fig7_battery_vs_t", "Alg. 3: mean battery over time for several offsets",
       "vartheta", (10.0, 20.0, 40.0),
       overrides=dict(_ALG23, algorithm="alg3", v=1.0, gamma_db=-15.0, b0_frac=0.5,
                      burn_in=0)),
    _p("fig8_bmse_vs_t_alg2", "Alg. 2: BMSE over time for several targets",
       "gamma_db", (-12.0, -15.0),
       overrides=dict(_ALG23, algorithm="alg2", v=2.0, burn_in=0),
       desk=dict(horizon=4_000, trials=3)),
    _p("fig9_bmse_vs_t_alg3", "Alg. 3: BMSE over time for several targets",
       "gamma_db", (-12.0, -15.0),
       overrides=dict(_ALG23, algorithm="alg3", v=2.0, burn_in=0)),
    _p("fig10_active_vs_t_mu", "Alg. 3: active nodes over time for several step sizes",
       "mu", (1e3, 1e4, 1e5),
       overrides=dict(_ALG23, algorithm="alg3", v=1.0, gamma_db=-15.0, b0_frac=0.5,
                      burn_in=0)),
)}

ALIASES = {name.split("_", 1)[0]: name for name in PRESETS}


def get_preset(name: str) -> Preset:
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise InvalidArgument(f"unknown preset {name!r}; valid names: {', '.join(PRESETS)}")
    return PRESETS[key]


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def traces_csv(traces) -> str:
    """Per-slot CSV text with every trial stacked."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MetricsTrace.COLUMNS)
    for tr in traces:
        cols = tr.columns()
        for row in zip(*(cols[c] for c in MetricsTrace.COLUMNS)):
            w.writerow([str(int(row[0]))] + [_fmt(v) for v in row[1:]])
    return buf.getvalue()


def summary_row(value, result) -> list:
    m, s = result.mean, result.std
    return [value, m["bmse"], s["bmse"], m["active"], m["energy_j"], m["battery_j"]]


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _slug(value) -> str:
    return f"{value:g}".replace("+", "")


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run_preset(preset: Preset, out_dir, scale="desk", seed=None, workers=1, echo=print):
    """Run every point of ``preset`` and write CSVs into ``out_dir``.

    Returns ``{series_label: [summary rows]}``. ``InvariantViolation`` and
    ``OSError`` propagate so the caller can map them to exit codes.
    """
    os.makedirs(out_dir, exist_ok=True)
    summaries = {}
    setups = {}
    for label, value, cfg in preset.points(scale, seed):
        # topology and prior depend only on these keys
        topo_key = (cfg.n, cfg.radius_m, cfg.kernel_variance, cfg.subspace_dim, cfg.worst_bmse_db,
                    cfg.noise_var, cfg.amplitude, cfg.seed, cfg.topology_seed, cfg.radio(),
                    cfg.percentile, cfg.max_bits, cfg.fading)
        if topo_key not in setups:
            setups[topo_key] = build_setup(cfg)
        result = run_monte_carlo(cfg, workers=workers, setup=setups[topo_key])
        stem = preset.name + (f"_{label}" if label else "")
        point = f"{stem}_{preset.sweep_key}={_slug(value)}"
        _write(os.path.join(out_dir, point + ".csv"), traces_csv(result.traces))
        _write(os.path.join(out_dir, point + ".cfg"), emit_config(cfg))
        row = summary_row(value, result)
        summaries.setdefault(label, []).append(row)
        if echo:
            echo(f"{stem:<28} {preset.sweep_key}={value:<10g} bmse={row[1]:.4g}±{row[2]:.2g} "
                 f"active={row[3]:.2f} energy_j={row[4]:.4g} battery_j={row[5]:.4g}")
    for label, rows in summaries.items():
        stem = preset.name + (f"_{label}" if label else "")
        _write(os.path.join(out_dir, stem + "_summary.csv"), summary_csv(rows))
    return summaries
