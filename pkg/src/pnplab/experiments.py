"""Desk-scale experiment protocols with deterministic CSV/SVG artifacts.

Four protocols: a scale sweep over a family of denoisers of graded quality,
a data-perturbation stability run, a joint noise-and-scale limit probing
convergent regularisation, and a noise-level table of Lipschitz estimates.

Every run is a pure function of its resolved config; grid points execute on a
bounded worker pool and are written in grid order, so the emitted CSV is
byte-identical for any worker count. Wall-clock runtimes are kept on the
in-memory records (and in the run manifest) but never written into the CSV.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import svgplot
from .analysis import delta_sweep, estimate_delta_opt
from .denoisers import (
    MmseDenoiser,
    OutputShrink,
    ScaledDenoiser,
    denoiser_from_config,
    estimate_lipschitz,
)
from .linop import operator_from_config
from .prior import GmmPrior
from .solver import DivergenceError, PnpConfig, pnp_pgd

__all__ = [
    "ConfigError",
    "ExperimentRecord",
    "EXPERIMENT_NAMES",
    "resolve_config",
    "run_experiment",
    "run_delta_sweep_experiment",
    "run_stability",
    "run_conv_reg",
    "run_lipschitz_table",
    "write_records_csv",
    "write_plots",
]

EXPERIMENT_NAMES = ("delta-sweep", "stability", "conv-reg", "lipschitz")


class ConfigError(ValueError):
    """A config is malformed or missing a required field."""


@dataclass
class ExperimentRecord:
    """One grid point: a key (scale, perturbation index, or noise level) plus metrics."""

    experiment: str
    key: float
    metrics: dict[str, float] = field(default_factory=dict)
    runtime_ms: float = 0.0


# -- defaults ----------------------------------------------------------------


def _pattern(n: int, kind: int) -> list[float]:
    """Deterministic smooth unit-amplitude pattern; stands in for an image."""
    i = np.arange(n)
    if kind == 0:
        return list(np.sin(2.0 * np.pi * i / n))
    if kind == 1:
        return list(np.cos(4.0 * np.pi * i / n))
    return list(2.0 * i / max(n - 1, 1) - 1.0)


def _multimodal_prior_config(n: int) -> dict:
    return {
        "weights": [0.4, 0.35, 0.25],
        "means": [_pattern(n, 0), _pattern(n, 1), _pattern(n, 2)],
        "variances": [0.25, 0.25, 0.25],
    }


def _single_prior_config(n: int) -> dict:
    return {"weights": [1.0], "means": [_pattern(n, 0)], "variances": [1.0]}


def _log_grid(start: float, stop: float, points: int) -> list[float]:
    return [float(v) for v in np.geomspace(start, stop, points)]


_DEFAULTS: dict[str, dict] = {
    "delta-sweep": {
        "prior": _multimodal_prior_config(8),
        "sigma": 0.1,
        "mismatch_ratios": [1.0, 1.5, 2.0, 3.0],
        "delta_grid": _log_grid(0.7, 20.0, 33),
        "samples": 20000,
        "seed": 0,
    },
    "stability": {
        "prior": _single_prior_config(64),
        "operator": {"kind": "mask", "dim": 64, "mask_fraction": 0.2, "seed": 0},
        "denoiser": {"kind": "exact_mmse"},
        "mode": "tweedie",
        "gamma_rescale": False,
        "delta": 1.09,
        "contract_eps": 1e-3,
        "sigma": 0.1,
        "k_grid": [1, 2, 4, 8, 16, 32, 64, 128, 256],
        "solver": {"tau": 1.0, "max_iters": 20000, "tol": 1e-11},
        "seed": 0,
    },
    "conv-reg": {
        "prior": _multimodal_prior_config(64),
        "operator": {"kind": "mask", "dim": 64, "mask_fraction": 0.2, "seed": 0},
        "denoiser": {"kind": "exact_mmse"},
        "mode": "tweedie",
        "gamma_rescale": True,
        "sigma": 0.1,
        "delta_grid": _log_grid(1.0, 1000.0, 32),
        "resample_noise_per_delta": False,
        "solver": {"tau": 1.0, "max_iters": 300, "tol": 1e-9},
        "seed": 0,
    },
    "lipschitz": {
        "prior": _single_prior_config(4),
        "sigma_grid": [0.01, 0.03, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
        "cloud_size": 128,
        "seed": 0,
    },
}


def resolve_config(name: str, config: dict | None = None) -> dict:
    """Fill defaults for the named experiment; unknown keys are rejected."""
    if name not in EXPERIMENT_NAMES:
        raise ConfigError(
            f"unknown experiment {name!r}; valid names: {', '.join(EXPERIMENT_NAMES)}"
        )
    resolved = {k: v for k, v in _DEFAULTS[name].items()}
    config = config or {}
    for key, value in config.items():
        if key not in resolved:
            raise ConfigError(f"unknown config field {key!r} for experiment {name!r}")
        if isinstance(resolved[key], dict) and isinstance(value, dict) and key == "solver":
            merged = dict(resolved[key])
            merged.update(value)
            resolved[key] = merged
        else:
            resolved[key] = value
    return resolved


def _solver_config(resolved: dict) -> PnpConfig:
    s = resolved["solver"]
    try:
        return PnpConfig(
            tau=s["tau"],
            max_iters=s.get("max_iters", 300),
            tol=s.get("tol", 1e-9),
            record_history=s.get("record_history", False),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad solver config: {exc}") from exc


def _build_prior(resolved: dict) -> GmmPrior:
    try:
        return GmmPrior.from_config(resolved["prior"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _run_grid(fn, keys, workers: int):
    """Evaluate a pure per-key task over a grid, preserving grid order."""
    if workers <= 1:
        return [fn(k) for k in keys]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, keys))


# -- protocols ---------------------------------------------------------------


def run_delta_sweep_experiment(config: dict | None = None, workers: int = 1):
    """Loss-versus-scale curves for a graded family of mismatched denoisers.

    One denoiser per mismatch ratio (training noise over data noise), all
    evaluated on one shared sample set. Emits the loss curve per ratio, the
    estimated optimal squared scale per ratio, and a summary flag recording
    whether those estimates increase strictly with the mismatch.
    """
    resolved = resolve_config("delta-sweep", config)
    prior = _build_prior(resolved)
    sigma = float(resolved["sigma"])
    ratios = [float(r) for r in resolved["mismatch_ratios"]]
    grid = [float(d) for d in resolved["delta_grid"]]
    samples = int(resolved["samples"])
    seed = int(resolved["seed"])
    if not grid or not ratios:
        raise ConfigError("delta_grid and mismatch_ratios must be nonempty")

    def task(ratio: float):
        t0 = time.perf_counter()
        denoiser = MmseDenoiser(prior, ratio * sigma)
        sweep = delta_sweep(denoiser, prior, sigma, grid, samples, seed)
        opt = estimate_delta_opt(denoiser, prior, sigma, samples, seed)
        ms = (time.perf_counter() - t0) * 1000.0
        return ratio, sweep, opt, ms

    results = _run_grid(task, ratios, workers)
    records: list[ExperimentRecord] = []
    opts = {}
    for ratio, sweep, opt, ms in results:
        label = f"r={ratio:g}"
        opts[ratio] = opt
        per_point = ms / (len(sweep) + 1)
        for delta, est in sweep:
            records.append(
                ExperimentRecord(
                    "delta-sweep",
                    key=delta,
                    metrics={f"l2[{label}]": est.value, f"l2_stderr[{label}]": est.stderr},
                    runtime_ms=per_point,
                )
            )
        records.append(
            ExperimentRecord(
                "delta-sweep",
                key=ratio,
                metrics={
                    "delta_opt_sq": opt.delta_opt_sq,
                    "delta_opt_sq_stderr": opt.stderr_delta_opt_sq,
                },
                runtime_ms=per_point,
            )
        )
    ordered = [opts[r].delta_opt_sq for r in ratios]
    strict = all(a < b for a, b in zip(ordered, ordered[1:]))
    records.append(
        ExperimentRecord(
            "delta-sweep", key=0.0, metrics={"quality_ordering_strict": float(strict)}
        )
    )
    return resolved, records


def _stability_denoiser(resolved: dict, prior: GmmPrior, sigma: float) -> ScaledDenoiser:
    base = denoiser_from_config(resolved["denoiser"], prior=prior, sigma=sigma)
    eps = float(resolved.get("contract_eps", 0.0))
    if eps > 0.0:
        base = OutputShrink(base, 1.0 - eps)
    return ScaledDenoiser(
        base,
        float(resolved["delta"]),
        mode=resolved["mode"],
        gamma_rescale=bool(resolved["gamma_rescale"]),
    )


def run_stability(config: dict | None = None, workers: int = 1):
    """Distance between reconstructions from perturbed and clean data.

    Forms measurements from one prior sample, perturbs them with one fixed
    noise draw shrunk by 1/k, and solves both problems from the same start.
    With a contractive scaled denoiser the reconstruction map is Lipschitz in
    the data, so the recorded distance decays at least like 1/k.
    """
    resolved = resolve_config("stability", config)
    prior = _build_prior(resolved)
    sigma = float(resolved["sigma"])
    op = operator_from_config(resolved["operator"])
    scaled = _stability_denoiser(resolved, prior, sigma)
    cfg = _solver_config(resolved)
    seed = int(resolved["seed"])
    k_grid = [float(k) for k in resolved["k_grid"]]
    if not k_grid:
        raise ConfigError("k_grid must be nonempty")

    clean, _ = prior.sample_pairs(sigma, 1, seed)
    x_true = clean[0]
    y = op.apply(x_true)
    xi = np.random.default_rng([seed, 1]).standard_normal(op.out_dim)
    try:
        limit = pnp_pgd(op, y, scaled, cfg)
    except DivergenceError:
        limit = None

    def task(k: float):
        t0 = time.perf_counter()
        metrics: dict[str, float] = {}
        if limit is None:
            metrics["diverged"] = 1.0
        else:
            try:
                res = pnp_pgd(op, y + (sigma / k) * xi, scaled, cfg)
                metrics["distance_to_limit"] = float(np.linalg.norm(res.x_star - limit.x_star))
                metrics["converged"] = float(res.converged)
            except DivergenceError:
                metrics["diverged"] = 1.0
        return ExperimentRecord(
            "stability", key=k, metrics=metrics, runtime_ms=(time.perf_counter() - t0) * 1e3
        )

    records = _run_grid(task, k_grid, workers)
    return resolved, records


def run_conv_reg(config: dict | None = None, workers: int = 1):
    """Joint limit of vanishing data noise and regularisation strength.

    For each scale on a logarithmic grid the clean measurements are perturbed
    by noise shrunk with the same scale, a fixed 300-iteration solve is run
    from the zero start, and the relative measurement-space residual is
    recorded, together with gaps between reconstructions at consecutive grid
    points. Divergence at a grid point is recorded as data, not an error.
    """
    resolved = resolve_config("conv-reg", config)
    prior = _build_prior(resolved)
    sigma = float(resolved["sigma"])
    if sigma < 0:
        raise ConfigError("sigma must be nonnegative")
    op = operator_from_config(resolved["operator"])
    base = denoiser_from_config(resolved["denoiser"], prior=prior, sigma=max(sigma, 1e-12))
    cfg = _solver_config(resolved)
    seed = int(resolved["seed"])
    grid = [float(d) for d in resolved["delta_grid"]]
    if not grid:
        raise ConfigError("delta_grid must be nonempty")
    resample = bool(resolved["resample_noise_per_delta"])

    clean, _ = prior.sample_pairs(max(sigma, 1e-12), 1, seed)
    x_true = clean[0]
    y0 = op.apply(x_true)
    norm_y0 = float(np.linalg.norm(y0))
    xi = np.random.default_rng([seed, 1]).standard_normal(op.out_dim)

    def task(item):
        index, delta = item
        t0 = time.perf_counter()
        scaled = ScaledDenoiser(
            base, delta, mode=resolved["mode"], gamma_rescale=bool(resolved["gamma_rescale"])
        )
        noise = (
            np.random.default_rng([seed, 2, index]).standard_normal(op.out_dim)
            if resample
            else xi
        )
        y_delta = y0 + (sigma / delta) * noise
        metrics: dict[str, float] = {}
        x_delta = None
        try:
            res = pnp_pgd(op, y_delta, scaled, cfg)
            x_delta = res.x_star
            metrics["data_consistency"] = float(
                np.linalg.norm(op.apply(x_delta) - y0) / max(norm_y0, 1e-300)
            )
            metrics["converged"] = float(res.converged)
        except DivergenceError:
            metrics["diverged"] = 1.0
        ms = (time.perf_counter() - t0) * 1e3
        return ExperimentRecord("conv-reg", key=delta, metrics=metrics, runtime_ms=ms), x_delta

    results = _run_grid(task, list(enumerate(grid)), workers)
    records = [rec for rec, _ in results]
    solutions = [sol for _, sol in results]
    for i in range(len(records) - 1):
        if solutions[i] is not None and solutions[i + 1] is not None:
            records[i].metrics["iterate_gap"] = float(
                np.linalg.norm(solutions[i] - solutions[i + 1])
            )
    return resolved, records


def run_lipschitz_table(config: dict | None = None, workers: int = 1):
    """Pairwise Lipschitz estimate of the optimal denoiser per noise level.

    The point cloud is drawn from the noisy prior at each level. An estimate
    above one is reported with a zero ``non_expansive`` flag rather than
    treated as a failure; multimodal priors genuinely exceed one between
    modes at small noise.
    """
    resolved = resolve_config("lipschitz", config)
    prior = _build_prior(resolved)
    sigma_grid = [float(s) for s in resolved["sigma_grid"]]
    if not sigma_grid:
        raise ConfigError("sigma_grid must be nonempty")
    cloud_size = int(resolved["cloud_size"])
    seed = int(resolved["seed"])

    def task(item):
        index, sigma = item
        t0 = time.perf_counter()
        _, noisy = prior.sample_pairs(sigma, cloud_size, np.random.SeedSequence([seed, index]))
        lip = estimate_lipschitz(MmseDenoiser(prior, sigma), noisy)
        return ExperimentRecord(
            "lipschitz",
            key=sigma,
            metrics={
                "lipschitz_max": lip,
                "non_expansive": float(lip <= 1.0 + 1e-9),
            },
            runtime_ms=(time.perf_counter() - t0) * 1e3,
        )

    records = _run_grid(task, list(enumerate(sigma_grid)), workers)
    return resolved, records


_RUNNERS = {
    "delta-sweep": run_delta_sweep_experiment,
    "stability": run_stability,
    "conv-reg": run_conv_reg,
    "lipschitz": run_lipschitz_table,
}


def run_experiment(name: str, config: dict | None = None, workers: int = 1):
    """Dispatch to the named protocol; returns (resolved config, records)."""
    if name not in _RUNNERS:
        raise ConfigError(
            f"unknown experiment {name!r}; valid names: {', '.join(EXPERIMENT_NAMES)}"
        )
    return _RUNNERS[name](config, workers=workers)


# -- artifacts ---------------------------------------------------------------


def _fmt_float(v: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(v))


def write_records_csv(path, records: list[ExperimentRecord], seed: int) -> None:
    """Write records as ``experiment,key,metric,value,runtime_ms,seed`` rows.

    Output is byte-deterministic for a fixed record list: rows are sorted
    stably by key, floats use round-trip-exact decimals, lines end with LF,
    and the runtime column is pinned to zero (measured runtimes live on the
    in-memory records and in the run manifest, never in the CSV).
    """
    rows = ["experiment,key,metric,value,runtime_ms,seed"]
    for rec in sorted(records, key=lambda r: r.key):
        for metric in sorted(rec.metrics):
            rows.append(
                f"{rec.experiment},{_fmt_float(rec.key)},{metric},"
                f"{_fmt_float(rec.metrics[metric])},0.0,{seed}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


_PLOT_AXES = {
    "delta-sweep": ("scale delta", True),
    "stability": ("perturbation index k", True),
    "conv-reg": ("scale delta", True),
    "lipschitz": ("noise level sigma", False),
}


def write_plots(name: str, records: list[ExperimentRecord], out_dir) -> list[str]:
    """One SVG line plot per metric; bracketed metric suffixes become series."""
    xlabel, log_x = _PLOT_AXES[name]
    grouped: dict[str, dict[str, tuple[list[float], list[float]]]] = {}
    for rec in sorted(records, key=lambda r: r.key):
        for metric, value in rec.metrics.items():
            if "[" in metric:
                base, label = metric[:-1].split("[", 1)
            else:
                base, label = metric, name
            series = grouped.setdefault(base, {}).setdefault(label, ([], []))
            series[0].append(rec.key)
            series[1].append(value)
    paths = []
    for base, series in sorted(grouped.items()):
        values = [v for xs, ys in series.values() for v in ys]
        log_y = all(v > 0 for v in values) and max(values) / max(min(values), 1e-300) > 50
        out = os.path.join(out_dir, f"{name}_{base}.svg")
        svgplot.line_plot(
            out,
            series,
            title=f"{name}: {base}",
            xlabel=xlabel,
            ylabel=base,
            log_x=log_x,
            log_y=log_y,
        )
        paths.append(out)
    return paths
