"""Command-line entry point.

Subcommands: ``delta-opt`` (optimal-scale estimate plus the sandwich check),
``run <experiment>`` (CSV/SVG artifacts plus a manifest), and ``selftest``
(fast oracle suite). Exit codes: 0 success, 1 config or I/O error,
2 degenerate denoiser, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import DegenerateDenoiserError, verify_sandwich
from .denoisers import AffineDenoiser, denoiser_from_config, tweedie_scale
from .experiments import (
    EXPERIMENT_NAMES,
    ConfigError,
    ExperimentRecord,
    resolve_config,
    run_experiment,
    write_plots,
    write_records_csv,
)
from .linop import Convolve1d, DenseOperator, Identity, Mask
from .prior import GmmPrior
from .solver import (
    PnpConfig,
    averagedness_theta,
    compose_averaged,
    linear_fixed_point_oracle,
    pnp_pgd,
)

_ENV_SEED = "PNPLAB_SEED"


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path!r} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def _resolve_seed(flag_seed, config: dict) -> int:
    if flag_seed is not None:
        return int(flag_seed)
    if "seed" in config and config["seed"] is not None:
        return int(config["seed"])
    env = os.environ.get(_ENV_SEED)
    if env is not None:
        return int(env)
    return 0


def _prepare_out_dir(out: str) -> None:
    os.makedirs(out, exist_ok=True)
    with tempfile.NamedTemporaryFile(prefix=".probe", dir=out):
        pass


def _write_manifest(out: str, name: str, payload: dict) -> None:
    path = os.path.join(out, f"{name}_manifest.json")
    fd, tmp = tempfile.mkstemp(prefix=".manifest", dir=out)
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _cmd_delta_opt(args) -> int:
    config = _load_json(args.config)
    for field in ("prior", "denoiser", "sigma"):
        if field not in config:
            print(f"config error: missing required field {field!r}", file=sys.stderr)
            return 1
    seed = _resolve_seed(args.seed, config)
    started = _now()
    try:
        prior = GmmPrior.from_config(config["prior"])
        sigma = float(config["sigma"])
        samples = int(config.get("samples", 100000))
        denoiser = denoiser_from_config(config["denoiser"], prior=prior, sigma=sigma)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        report = verify_sandwich(denoiser, prior, sigma, samples, seed)
    except DegenerateDenoiserError as exc:
        print(f"degenerate denoiser: {exc}", file=sys.stderr)
        return 2
    opt = report.delta_opt
    print(f"delta_opt_sq = {opt.delta_opt_sq!r}")
    print(f"stderr_delta_opt_sq = {opt.stderr_delta_opt_sq!r}")
    print(f"sandwich = {'pass' if report.passed else 'fail'}")
    print(
        f"l2_mmse = {report.l2_mmse.value!r}  l2_scaled = {report.l2_scaled.value!r}  "
        f"l2_base = {report.l2_base.value!r}"
    )
    try:
        _prepare_out_dir(args.out)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 1
    record = ExperimentRecord(
        "delta-opt",
        key=0.0,
        metrics={
            "delta_opt_sq": opt.delta_opt_sq,
            "delta_opt_sq_stderr": opt.stderr_delta_opt_sq,
            "l2_mmse": report.l2_mmse.value,
            "l2_scaled": report.l2_scaled.value,
            "l2_base": report.l2_base.value,
            "sandwich_pass": float(report.passed),
        },
    )
    write_records_csv(os.path.join(args.out, "delta-opt.csv"), [record], seed)
    _write_manifest(
        args.out,
        "delta-opt",
        {
            "command": "delta-opt",
            "config_path": os.path.abspath(args.config),
            "resolved_spec": {**config, "samples": samples, "seed": seed},
            "seed": seed,
            "tool_version": __version__,
            "started_at": started,
            "finished_at": _now(),
        },
    )
    return 0


def _cmd_run(args) -> int:
    try:
        config = _load_json(args.config) if args.config else {}
        seed = _resolve_seed(args.seed, config)
        config["seed"] = seed
        resolved = resolve_config(args.experiment, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        _prepare_out_dir(args.out)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 1
    started = _now()
    t0 = time.perf_counter()
    resolved, records = run_experiment(args.experiment, resolved, workers=args.workers)
    total_ms = (time.perf_counter() - t0) * 1e3
    csv_path = os.path.join(args.out, f"{args.experiment}.csv")
    write_records_csv(csv_path, records, seed)
    write_plots(args.experiment, records, args.out)
    _write_manifest(
        args.out,
        args.experiment,
        {
            "command": f"run {args.experiment}",
            "config_path": os.path.abspath(args.config) if args.config else None,
            "resolved_spec": resolved,
            "seed": seed,
            "tool_version": __version__,
            "started_at": started,
            "finished_at": _now(),
            "total_runtime_ms": total_ms,
        },
    )
    print(f"wrote {csv_path}")
    return 0


def _selftest_checks():
    """The fast oracle suite; each check returns (passed, detail)."""

    def adjoint_consistency():
        rng = np.random.default_rng(7)
        ops = [
            Identity(6),
            Mask(np.array([True, False, True, True, False, True])),
            Convolve1d(np.array([0.5, 0.3, 0.2]), 6),
            DenseOperator(rng.standard_normal((4, 6))),
        ]
        worst = 0.0
        for op in ops:
            for _ in range(100):
                x = rng.standard_normal(op.in_dim)
                y = rng.standard_normal(op.out_dim)
                lhs = float(op.apply(x) @ y)
                rhs = float(x @ op.adjoint(y))
                worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
        return worst <= 1e-10, f"max relative defect {worst:.3e}"

    def tweedie_consistency():
        rng = np.random.default_rng(11)
        priors = [
            GmmPrior([1.0], [[0.0, 0.0]], [1.0]),
            GmmPrior([0.5, 0.5], [[-2.0], [2.0]], [0.25, 0.25]),
            GmmPrior([0.3, 0.3, 0.4], rng.standard_normal((3, 4)), [0.5, 1.0, 0.25]),
        ]
        worst = 0.0
        for prior in priors:
            pts = 3.0 * rng.standard_normal((200, prior.dim))
            a = prior.mmse_denoise(pts, 0.5)
            b = prior.posterior_mean(pts, 0.5)
            dev = np.linalg.norm(a - b, axis=1) / (1.0 + np.linalg.norm(pts, axis=1))
            worst = max(worst, float(dev.max()))
        return worst <= 1e-10, f"max relative deviation {worst:.3e}"

    def averagedness_identity():
        deltas = np.linspace(1.01, 40.0, 100)
        worst = 0.0
        for d in deltas:
            u = 1.0 / (d * d)
            worst = max(worst, abs(compose_averaged(u, 0.5) - averagedness_theta(d)))
        return worst <= 1e-14, f"max identity defect {worst:.3e}"

    def affine_oracle():
        rng = np.random.default_rng(3)
        n = 8
        w = rng.standard_normal((n, n))
        w *= 0.9 / np.linalg.svd(w, compute_uv=False)[0]
        base = AffineDenoiser(w, rng.standard_normal(n))
        op = DenseOperator(rng.standard_normal((n, n)))
        y = rng.standard_normal(n)
        cfg = PnpConfig(tau=1.0 / op.op_norm_sq(), max_iters=50000, tol=1e-13)
        scaled = tweedie_scale(base, np.sqrt(2.0))
        got = pnp_pgd(op, y, scaled, cfg).x_star
        want = linear_fixed_point_oracle(op, y, scaled, cfg)
        rel = float(np.linalg.norm(got - want) / (1.0 + np.linalg.norm(want)))
        return rel <= 1e-8, f"relative gap {rel:.3e}"

    return [
        ("adjoint-consistency", adjoint_consistency),
        ("tweedie-consistency", tweedie_consistency),
        ("averagedness-identity", averagedness_identity),
        ("affine-oracle", affine_oracle),
    ]


def _cmd_selftest(_args) -> int:
    failed = []
    for name, check in _selftest_checks():
        passed, detail = check()
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        if not passed:
            failed.append(name)
    if failed:
        print(f"selftest failed: {', '.join(failed)}", file=sys.stderr)
        return 3
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnplab",
        description="Scaled plug-and-play denoising experiments with closed-form oracles.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("delta-opt", help="estimate the optimal scale and check the sandwich")
    p_opt.add_argument("--config", required=True)
    p_opt.add_argument("--out", default=".")
    p_opt.add_argument("--seed", type=int, default=None)
    p_opt.set_defaults(func=_cmd_delta_opt)

    p_run = sub.add_parser("run", help="run an experiment and write CSV/SVG artifacts")
    p_run.add_argument("experiment")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--out", default=".")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.set_defaults(func=_cmd_run)

    p_self = sub.add_parser("selftest", help="run the fast oracle suite")
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if getattr(args, "command", None) == "run" and args.experiment not in EXPERIMENT_NAMES:
        print(
            f"unknown experiment {args.experiment!r}; valid names: "
            f"{', '.join(EXPERIMENT_NAMES)}",
            file=sys.stderr,
        )
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
