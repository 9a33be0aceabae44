"""Named experiments, each executing one acceptance criterion.

Every preset writes its outputs under ``<out>/<preset>/<timestamp>/`` together
with ``manifest.json``, which records the metrics and a pass/fail verdict for
each expectation.  Presets that share a simulation (the dispersive-decay
family) reuse one in-process trajectory.
"""

from __future__ import annotations

import datetime as _dt
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .airy import airy_ai, airy_ai_quadrature
from .diagnostics import NormReport, cubic_amplitude_scan, decay_fit, scattering_report, xnorm
from .grid import Field, Frame, GridSpec, InitialCondition, MultiplierSpec, fft_workers, forward, make_grid
from .io import write_csv, write_json, write_snapshot
from .linear import (
    ProfileSnapshot,
    airy_kernel_closed,
    airy_kernel_spectral,
    envelope_check,
    kernel_grid,
    kernel_weak_lp_scaling,
    propagate_linear,
)
from .resonance import (
    PhasePoint,
    cutoff_scaling,
    gradient_fd_check,
    identity_check,
    phase,
    resonance_scan,
)
from .solver import RunConfig, default_output_times, oracle_equivalence, simulate

__all__ = ["Expectation", "ExperimentPreset", "RunManifest", "PRESETS", "run_preset", "preset_names",
           "MAIN_RUN", "clear_cache"]


@dataclass(frozen=True)
class Expectation:
    metric: str
    comparator: str
    threshold: float | tuple[float, float]

    def check(self, value) -> bool:
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return False
        c, t = self.comparator, self.threshold
        if c == "<=":
            return value <= t
        if c == ">=":
            return value >= t
        if c == "<":
            return value < t
        if c == "==":
            return value == t
        if c == "in":
            return t[0] <= value <= t[1]
        raise ValueError(f"unknown comparator {c!r}")

    def describe(self) -> str:
        if self.comparator == "in":
            return f"{self.metric} in [{self.threshold[0]}, {self.threshold[1]}]"
        return f"{self.metric} {self.comparator} {self.threshold}"


@dataclass
class PresetContext:
    out_dir: Path
    seed: int
    outputs: list[str] = field(default_factory=list)
    config_hash: str = ""

    def csv(self, name: str, columns, rows) -> Path:
        p = write_csv(self.out_dir / name, list(columns), rows)
        self.outputs.append(name)
        return p

    def json(self, name: str, obj) -> Path:
        p = write_json(self.out_dir / name, obj)
        self.outputs.append(name)
        return p

    def snapshot(self, name: str, fld: Field) -> Path:
        p = write_snapshot(self.out_dir / "snapshots" / name, fld)
        self.outputs.append(f"snapshots/{name}")
        return p


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    criterion: int
    description: str
    runner: Callable[["ExperimentPreset", PresetContext], dict]
    expected: tuple[Expectation, ...]
    config: RunConfig | dict | None = None
    seed: int = 0
    group: str | None = None


@dataclass
class RunManifest:
    preset: str
    criterion: int
    tool_version: str
    config_hash: str
    seed: int
    fft_workers: int
    started: str
    finished: str
    wall_seconds: float
    outputs: list[str]
    metrics: dict
    expectations: list[dict]
    passed: bool
    out_dir: str

    def to_json(self) -> dict:
        return dict(self.__dict__)


# --- shared simulation ------------------------------------------------------

BOX_256 = GridSpec(256, 256, 128 * math.pi, 128 * math.pi)
BOX_512 = GridSpec(512, 512, 256 * math.pi, 256 * math.pi)
BAND_IC = InitialCondition(kind="gaussian", width=1.0, band_limit=(0.8, 1.3))

MAIN_RUN = RunConfig(grid=BOX_512, ic=BAND_IC, epsilon=0.05, t_start=1.0, t_end=64.0, dt_max=0.1,
                     output_times=tuple(default_output_times(1.0, 64.0, 4)))
CONSERVATION_RUN = RunConfig(grid=BOX_256, ic=BAND_IC, epsilon=0.1, t_start=1.0, t_end=10.0, dt_max=0.1,
                             output_times=(1.0, 2.0, 4.0, 6.0, 8.0, 10.0))
CUBIC_BASE = RunConfig(grid=BOX_256, ic=BAND_IC, epsilon=0.02, t_start=1.0, t_end=16.0, dt_max=0.1)

_CACHE: dict[str, list] = {}


def clear_cache() -> None:
    _CACHE.clear()


def cached_simulation(config: RunConfig):
    key = config.hash()
    if key not in _CACHE:
        _CACHE[key] = simulate(config)
    return _CACHE[key]


def _write_run(ctx: PresetContext, config: RunConfig, traj, snapshot_times=None) -> None:
    ctx.config_hash = config.hash()
    ctx.json("config.json", config.to_dict())
    ctx.csv("norms.csv", NormReport.columns(), [p.norms.as_row() for p in traj])
    for p in traj:
        t = p.state.time
        if snapshot_times is None or any(abs(t - s) <= 1e-9 * s for s in snapshot_times):
            ctx.snapshot(f"t_{t:010.6f}.mzkf", p.state.field)


def _dyadic(t_end: float) -> list[float]:
    return [2.0**k for k in range(int(math.log2(t_end)) + 1)]


# --- runners --------------------------------------------------------------------

def _linear_unitarity(preset, ctx):
    p = preset.config
    spec = GridSpec(p["n"], p["n"], p["len"], p["len"])
    rng = np.random.default_rng(ctx.seed)
    sf = forward(Field(spec, rng.standard_normal(spec.shape), 0.0, Frame.AB))
    l0 = sf.l2_norm()
    rows, worst = [], 0.0
    for k in range(1, p["steps"] + 1):
        sf = propagate_linear(sf, p["dt"])
        drift = abs(sf.l2_norm() - l0) / l0
        worst = max(worst, drift)
        if k % 100 == 0:
            rows.append({"step": k, "time": sf.time, "l2": sf.l2_norm(), "relative_drift": drift})
    ctx.csv("unitarity.csv", ["step", "time", "l2", "relative_drift"], rows)
    return {"max_relative_l2_drift": worst, "steps": p["steps"]}


def _airy_cross(preset, ctx):
    p = preset.config
    rows, worst = [], 0.0
    for t in p["times"]:
        x = np.linspace(-p["x_max"], p["x_max"], p["n_points"])
        err = float(np.max(np.abs(airy_kernel_spectral(t, x) - airy_kernel_closed(t, x))))
        worst = max(worst, err)
        rows.append({"t": t, "x_max": p["x_max"], "n_points": p["n_points"], "max_abs_error": err})
    ctx.csv("airy_cross.csv", ["t", "x_max", "n_points", "max_abs_error"], rows)
    ai0_quad = float(airy_ai_quadrature(0.0))
    ai0_closed = float(airy_kernel_closed(1.0 / 3.0, 0.0))
    return {
        "max_abs_error": worst,
        "ai0_quadrature": ai0_quad,
        "ai0_closed": ai0_closed,
        "ai0_quadrature_vs_reference": abs(ai0_quad - 0.3550280539),
        "ai0_closed_vs_quadrature": abs(ai0_closed - ai0_quad),
    }


def _kernel_similarity(preset, ctx):
    p = preset.config
    y = np.linspace(-p["y_max"], p["y_max"], p["n_points"])
    base = airy_kernel_spectral(1.0, y)
    ref = float(np.max(np.abs(base)))
    collapse = 0.0
    rows = []
    for t in p["times"]:
        scaled = t ** (1.0 / 3.0) * airy_kernel_spectral(t, t ** (1.0 / 3.0) * y)
        # K_t(x) = t^(-2/3) K_1(t^(-1/3) x) is the square of this 1D law
        dev = float(np.max(np.abs(scaled - base))) / ref
        collapse = max(collapse, 2.0 * dev + dev * dev)
    env0 = envelope_check(p["times"], 0.0, 0.0)
    env45 = envelope_check(p["times"], 0.45, 0.45)
    for t, c0, c45 in zip(p["times"], env0, env45):
        rows.append({"t": t, "envelope_beta_0": c0, "envelope_beta_045": c45})
    ctx.csv("envelope.csv", ["t", "envelope_beta_0", "envelope_beta_045"], rows)
    yd = np.arange(-p["y_envelope"], p["y_envelope"], 1e-3)
    dense = float(np.max(np.abs(airy_kernel_closed(1.0, yd)) * (1 + yd**2) ** 0.125)) ** 2
    return {
        "collapse_max_relative_deviation": collapse,
        "envelope_beta_0": [float(c) for c in env0],
        "envelope_beta_0_spread": float(np.max(env0) / np.min(env0) - 1.0),
        "envelope_beta_045": [float(c) for c in env45],
        "envelope_beta_045_spread": float(np.max(env45) / np.min(env45) - 1.0),
        "envelope_beta_0_dense_oracle": dense,
        "envelope_beta_0_vs_oracle": abs(float(env0[0]) / dense - 1.0),
        "envelope_finite": bool(np.all(np.isfinite(env0)) and np.all(np.isfinite(env45))),
    }


def _weaklp(preset, ctx):
    p = preset.config
    rows = kernel_weak_lp_scaling(p["times"], p["ps"])
    ctx.csv("weaklp.csv", ["t", "p", "quasi_norm", "predicted_ratio", "measured_ratio", "deviation"], rows)
    metrics = {}
    for pp in p["ps"]:
        r = [row for row in rows if row["p"] == pp]
        metrics[f"exponent_p{int(pp)}"] = r[0]["exponent"]
        metrics[f"exponent_error_p{int(pp)}"] = abs(r[0]["exponent"] - r[0]["predicted_exponent"])
        metrics[f"max_ratio_deviation_p{int(pp)}"] = max(row["deviation"] for row in r)
    metrics["max_exponent_error"] = max(v for k, v in metrics.items() if k.startswith("exponent_error"))
    return metrics


def _oracle(preset, ctx):
    p = preset.config
    res = oracle_equivalence(n=p["n"], trials=p["trials"], s=p["s"], seed=ctx.seed)
    ctx.json("oracle.json", res)
    return res


def _conservation(preset, ctx):
    cfg = preset.config
    traj = cached_simulation(cfg)
    _write_run(ctx, cfg, traj, snapshot_times=[cfg.t_start, cfg.t_end])
    l0 = traj[0].norms.l2
    return {"max_relative_l2_drift": max(abs(p.norms.l2 - l0) / l0 for p in traj),
            "final_time": traj[-1].state.time}


def _decay_series(traj, name):
    return [(p.norms.t, getattr(p.norms, name)) for p in traj]


def _decay(preset, ctx):
    cfg = preset.config
    traj = cached_simulation(cfg)
    _write_run(ctx, cfg, traj, snapshot_times=_dyadic(cfg.t_end))
    fits = {n: decay_fit(_decay_series(traj, n), (4.0, cfg.t_end)) for n in ("linf", "linf_half_a", "linf_half_b", "linf_grad")}
    ctx.json("fits.json", {k: v.to_json() for k, v in fits.items()})
    return {
        "linf_exponent": fits["linf"].exponent,
        "linf_half_a_exponent": fits["linf_half_a"].exponent,
        "linf_half_b_exponent": fits["linf_half_b"].exponent,
        "linf_grad_exponent": fits["linf_grad"].exponent,
        "linf_r2": fits["linf"].r_squared,
        "max_boundary_mass": max(p.norms.boundary_mass for p in traj),
    }


def _boundedness(preset, ctx):
    cfg = preset.config
    traj = cached_simulation(cfg)
    _write_run(ctx, cfg, traj, snapshot_times=[])
    first = traj[0].norms
    reliable = [p.norms for p in traj if p.norms.boundary_mass < cfg.boundary_mass_threshold]
    return {
        "h3_ratio": max(r.h3 for r in reliable) / first.h3,
        "w_a_ratio": max(r.w_a for r in reliable) / first.w_a,
        "w_b_ratio": max(r.w_b for r in reliable) / first.w_b,
        "xnorm_ratio": xnorm(traj) / xnorm(traj[:1]),
        "n_reliable": len(reliable),
        "n_outputs": len(traj),
    }


def _dtf(preset, ctx):
    cfg = preset.config
    traj = cached_simulation(cfg)
    _write_run(ctx, cfg, traj, snapshot_times=[])
    fit = decay_fit(_decay_series(traj, "dtf_h2"), (4.0, cfg.t_end))
    ser = [v for t, v in _decay_series(traj, "dtf_h2") if t >= 4.0]
    ctx.json("dtf_fit.json", fit.to_json())
    return {"dtf_exponent": fit.exponent, "dtf_r2": fit.r_squared,
            "dtf_decreasing_after_4": all(b < a for a, b in zip(ser, ser[1:]))}


def _scattering(preset, ctx):
    cfg = preset.config
    traj = cached_simulation(cfg)
    _write_run(ctx, cfg, traj, snapshot_times=[])
    rep = scattering_report([p.profile for p in traj], _decay_series(traj, "dtf_h2"), (4.0, cfg.t_end))
    ctx.json("scattering.json", rep.to_json())
    late = [d for t1, _, d in rep.pairs if t1 >= 4.0]
    return {
        "increments_decreasing_after_4": all(b < a for a, b in zip(late, late[1:])),
        "n_late_pairs": len(late),
        "extrapolated_tail": rep.extrapolated_tail,
        "tail_finite": bool(math.isfinite(rep.extrapolated_tail)),
        "f_increment_total": sum(d for _, _, d in rep.pairs),
    }


def _cubic(preset, ctx):
    p = preset.config
    scan = cubic_amplitude_scan(p["epsilons"], p["horizon"], p["base"], simulate_fn=cached_simulation)
    ctx.csv("cubic_scan.csv", ["epsilon", "delta_f_h2"], [{"epsilon": e, "delta_f_h2": d} for e, d in scan.rows])
    return {"slope": scan.slope, "ratios": scan.ratio(), "min_ratio": min(scan.ratio()), "max_ratio": max(scan.ratio())}


def _resonance(preset, ctx):
    p = preset.config
    scan = resonance_scan(p["rho_grid"], p["tol"], n_random=p["n_random"], seed=ctx.seed)
    fd = gradient_fd_check(p["n_fd"], seed=ctx.seed)
    out = dict(scan)
    out.pop("mismatches")
    ctx.json("resonance_scan.json", {**out, "mismatches": scan["mismatches"], "fd": fd})
    return {
        "n_predicate_mismatches": scan["n_predicate_mismatches"],
        "n_constructed_not_space": scan["n_constructed_not_space"],
        "n_space_time": scan["n_space_time"],
        "n_off_manifold_flagged_space": scan["n_off_manifold_flagged_space"],
        "phi_all_plus_unit": phase(PhasePoint((3.0, 0.0), (1.0, 0.0), (1.0, 0.0))),
        "max_m_gradxi_on_resonances": scan["max_m_gradxi_on_resonances"],
        "gradient_fd_max_relative_error": fd["max_relative_error"],
    }


def _identities(preset, ctx):
    p = preset.config
    res = identity_check(p["n"], seed=ctx.seed)
    ctx.json("identities.json", res)
    return {"max_relative_residual": max(res["max_relative_residual"]), "n_skipped": res["n_skipped"]}


def _cutoff(preset, ctx):
    p = preset.config
    res = cutoff_scaling(p["s"], seed=ctx.seed)
    ctx.json("cutoff_scaling.json", res)
    return {
        "chi_max_deviation": res["chi_max_deviation"],
        "singular_exponent": res["fitted_exponent"],
        "singular_exponent_relative_error": res["exponent_relative_error"],
        "singular_normalised_max_deviation": res["normalised_max_deviation"],
    }


E = Expectation

PRESETS: dict[str, ExperimentPreset] = {
    p.name: p
    for p in [
        ExperimentPreset("linear-unitarity", 1, "1000 semigroup steps on a 256^2 grid", _linear_unitarity,
                         (E("max_relative_l2_drift", "<=", 1e-12),),
                         {"n": 256, "len": 128 * math.pi, "steps": 1000, "dt": 0.1}),
        ExperimentPreset("airy-cross", 2, "spectral vs closed-form Airy kernel", _airy_cross,
                         (E("max_abs_error", "<=", 1e-6), E("ai0_quadrature_vs_reference", "<=", 1e-9),
                          E("ai0_closed_vs_quadrature", "<=", 1e-9)),
                         {"times": [1.0, 8.0], "x_max": 20.0, "n_points": 4001}),
        ExperimentPreset("kernel-similarity", 3, "self-similar collapse and envelope constants", _kernel_similarity,
                         (E("collapse_max_relative_deviation", "<=", 0.01), E("envelope_beta_0_spread", "<=", 0.01),
                          E("envelope_finite", "==", True), E("envelope_beta_0_vs_oracle", "<=", 1e-4)),
                         {"times": [1.0, 10.0, 100.0], "y_max": 20.0, "n_points": 2001, "y_envelope": 40.0}),
        ExperimentPreset("weaklp-scaling", 4, "weak-L^p quasi-norm scaling of the 2D kernel", _weaklp,
                         (E("max_exponent_error", "<=", 0.03), E("max_ratio_deviation_p4", "<=", 0.05),
                          E("max_ratio_deviation_p6", "<=", 0.05)),
                         {"times": [1.0, 8.0, 64.0], "ps": [4.0, 6.0]}),
        ExperimentPreset("oracle-equivalence", 5, "pseudospectral cubic term vs direct trilinear sum", _oracle,
                         (E("max_relative_deviation", "<=", 1e-10),),
                         {"n": 8, "trials": 100, "s": 1.0}, seed=5),
        ExperimentPreset("conservation", 6, "L2 conservation at eps=0.1, T=10", _conservation,
                         (E("max_relative_l2_drift", "<=", 1e-8),), CONSERVATION_RUN),
        ExperimentPreset("decay-2-3", 7, "dispersive decay rates of the eps=0.05 run", _decay,
                         (E("linf_exponent", "in", (-0.75, -0.58)), E("linf_half_a_exponent", "<=", -0.75),
                          E("linf_grad_exponent", "<=", -0.54)), MAIN_RUN, group="main"),
        ExperimentPreset("bounded-norms", 8, "H3 and weighted-norm boundedness of the eps=0.05 run", _boundedness,
                         (E("h3_ratio", "<=", 1.1), E("w_a_ratio", "<=", 1.1), E("w_b_ratio", "<=", 1.1),
                          E("n_reliable", ">=", 4)), MAIN_RUN, group="main"),
        ExperimentPreset("dtf-decay", 9, "decay of the profile time derivative", _dtf,
                         (E("dtf_exponent", "<=", -1.0),), MAIN_RUN, group="main"),
        ExperimentPreset("scattering", 10, "Cauchy behaviour of the profile along dyadic times", _scattering,
                         (E("increments_decreasing_after_4", "==", True), E("tail_finite", "==", True),
                          E("n_late_pairs", ">=", 3)), MAIN_RUN, group="main"),
        ExperimentPreset("cubic-scaling", 11, "profile change vs amplitude", _cubic,
                         (E("slope", "in", (2.8, 3.2)), E("min_ratio", ">=", 7.0), E("max_ratio", "<=", 9.0)),
                         {"epsilons": [0.02, 0.04, 0.08], "horizon": 16.0, "base": CUBIC_BASE}),
        ExperimentPreset("resonance-algebra", 12, "space-time resonance characterisation", _resonance,
                         (E("n_predicate_mismatches", "==", 0), E("n_constructed_not_space", "==", 0),
                          E("n_off_manifold_flagged_space", "==", 0), E("phi_all_plus_unit", "==", 24.0),
                          E("max_m_gradxi_on_resonances", "<=", 1e-9),
                          E("gradient_fd_max_relative_error", "<=", 1e-6)),
                         {"rho_grid": [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0], "tol": 1e-9, "n_random": 10000,
                          "n_fd": 10000}, seed=12),
        ExperimentPreset("singular-identities", 13, "singular identities on random inputs", _identities,
                         (E("max_relative_residual", "<=", 1e-12),), {"n": 10000}, seed=13),
        ExperimentPreset("cutoff-scaling", 14, "time-dependent cutoff symbol norms", _cutoff,
                         (E("chi_max_deviation", "<=", 1e-9), E("singular_exponent_relative_error", "<=", 0.1),
                          E("singular_normalised_max_deviation", "<=", 0.1)),
                         {"s": [1.0, 16.0, 256.0]}, seed=14),
    ]
}


def preset_names() -> list[str]:
    return list(PRESETS)


def _stamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")


def run_preset(name: str, out_root="out", *, seed: int | None = None) -> RunManifest:
    """Execute a preset, write its outputs and manifest, and return the manifest."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    preset = PRESETS[name]
    seed = preset.seed if seed is None else seed
    out_dir = Path(out_root) / name / _stamp()
    out_dir.mkdir(parents=True, exist_ok=False)
    ctx = PresetContext(out_dir, seed)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    metrics = preset.runner(preset, ctx)
    wall = time.perf_counter() - t0
    checks = []
    for e in preset.expected:
        value = metrics.get(e.metric)
        checks.append({"metric": e.metric, "comparator": e.comparator,
                       "threshold": list(e.threshold) if isinstance(e.threshold, tuple) else e.threshold,
                       "value": value, "passed": bool(e.check(value)), "description": e.describe()})
    manifest = RunManifest(
        preset=name, criterion=preset.criterion, tool_version=__version__,
        config_hash=ctx.config_hash or _params_hash(preset), seed=seed, fft_workers=fft_workers(),
        started=started, finished=_dt.datetime.now(_dt.timezone.utc).isoformat(), wall_seconds=wall,
        outputs=list(ctx.outputs), metrics=metrics, expectations=checks,
        passed=all(c["passed"] for c in checks), out_dir=str(out_dir),
    )
    write_json(out_dir / "manifest.json", manifest.to_json())
    return manifest


def _params_hash(preset: ExperimentPreset) -> str:
    import hashlib
    import json

    cfg = preset.config
    blob = json.dumps(cfg.to_dict() if isinstance(cfg, RunConfig) else cfg, sort_keys=True, default=str)
    return hashlib.sha256(f"{preset.name}:{blob}".encode()).hexdigest()[:16]
