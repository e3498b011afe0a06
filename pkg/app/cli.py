"""Command line entry point: ``python -m app.cli <command> ...``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from app.core.config import settings
from app.core.errors import ConfigurationError
from app.core.seeding import mix_seed
from app.schemas.gdflow import GdConfig
from app.schemas.harness import SweepConfig
from app.schemas.models import ModelSpec, NoiseSpec, RotationSpec
from app.schemas.solver import SolverConfig
from app.services import artifacts
from app.services.datagen import apply_noise, check_assumptions, mu_of, sample_clean
from app.services.diagnostics import (
    bayes_reference,
    check_events,
    corollary_bound,
    minimal_passing_c,
    risk_report,
    theorem_bound,
)
from app.services.gdflow import DivergingLoss, train_gd
from app.services.harness import DATA_STREAM, NOISE_STREAM, SweepIOError, run_sweep
from app.services.plotting import emit_plot, plot_frame
from app.services.presets import PRESET_NAMES, preset
from app.services.solver import NotSeparable, margin_stats, max_margin

logger = logging.getLogger("app.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _emit(payload: BaseModel | dict[str, Any]) -> None:
    if isinstance(payload, BaseModel):
        print(payload.model_dump_json(indent=2))
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))


def _model_spec(args: argparse.Namespace) -> ModelSpec:
    if getattr(args, "spec", None):
        return ModelSpec.model_validate_json(Path(args.spec).read_text(encoding="utf-8"))
    rotation = RotationSpec() if args.rotation_seed is None else RotationSpec.seeded(args.rotation_seed)
    if args.model == "gaussian_cc":
        mu = [args.gamma] * args.s + [0.0] * (args.p - args.s)
        return ModelSpec.gaussian(mu, rotation=rotation)
    return ModelSpec(kind=args.model, p=args.p, s=args.s, gamma=args.gamma, rotation=rotation)


def _noise_spec(args: argparse.Namespace) -> NoiseSpec:
    if args.noise == "none" or args.eta == 0.0:
        return NoiseSpec()
    return NoiseSpec(kind=args.noise, eta=args.eta)


def _spec_from_manifest(data_path: Path) -> ModelSpec:
    manifest = artifacts.read_manifest(data_path)
    if "model" not in manifest:
        raise ConfigurationError(f"{data_path} has no manifest with the generating model")
    return ModelSpec.model_validate(manifest["model"])


def _cmd_generate(args: argparse.Namespace) -> int:
    spec = _model_spec(args)
    noise = _noise_spec(args)
    clean = sample_clean(spec, args.n, mix_seed(args.seed, DATA_STREAM))
    data = apply_noise(clean, noise, mix_seed(args.seed, NOISE_STREAM), mu=mu_of(spec))
    artifacts.write_dataset(
        data,
        Path(args.out),
        manifest={
            "model": spec.model_dump(mode="json"),
            "noise": noise.model_dump(mode="json"),
            "seed": args.seed,
        },
    )
    _emit({"path": args.out, "n": data.n, "p": data.p, "n_noisy": len(data.noisy_set)})
    return EXIT_OK


def _cmd_solve(args: argparse.Namespace) -> int:
    data = artifacts.read_dataset(Path(args.data))
    classifier = max_margin(data, SolverConfig(kkt_tol=args.kkt_tol))
    artifacts.write_classifier(classifier, Path(args.out))
    stats = margin_stats(classifier, data)
    _emit(
        {
            "path": args.out,
            "norm_w": classifier.norm,
            "support_size": len(classifier.support_set),
            "min_margin": stats.min_margin,
            "kkt_worst": classifier.kkt.worst() if classifier.kkt else None,
        }
    )
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    data_path = Path(args.data)
    data = artifacts.read_dataset(data_path)
    if args.alpha is not None:
        cfg = GdConfig.fixed(
            args.alpha,
            max_iters=args.iters,
            log_stride=args.stride,
            direction_gap_target=args.gap_target,
            keep_loss_snapshots=args.losses_out is not None,
        )
    else:
        cfg = GdConfig(
            max_iters=args.iters,
            log_stride=args.stride,
            direction_gap_target=args.gap_target,
            keep_loss_snapshots=args.losses_out is not None,
        )
    reference = artifacts.read_classifier(Path(args.reference)) if args.reference else None
    manifest = artifacts.read_manifest(data_path)
    mu = mu_of(ModelSpec.model_validate(manifest["model"])) if "model" in manifest else None

    _, trace = train_gd(data, cfg, reference, mu=mu)
    artifacts.write_trace(trace, Path(args.out), Path(args.losses_out) if args.losses_out else None)
    final = trace.final
    _emit(
        {
            "path": args.out,
            "iterations": trace.iterations,
            "step_size": trace.step_size,
            "final_loss": final.loss,
            "sup_a_max": trace.sup_a_max,
            "direction_gap": final.direction_gap,
            "stopped_early": trace.stopped_early,
        }
    )
    return EXIT_OK


def _cmd_diagnose_bound(args: argparse.Namespace) -> int:
    if args.mu_norm_sq is not None:
        value = theorem_bound(args.mu_norm_sq, args.p, args.eta, args.c)
        _emit({"kind": "theorem", "bound": value})
    else:
        value = corollary_bound(args.gamma, args.s, args.p, args.eta, args.c)
        _emit({"kind": "corollary", "bound": value})
    return EXIT_OK


def _cmd_diagnose_bayes(args: argparse.Namespace) -> int:
    _emit(bayes_reference(args.mu_norm, args.eta, args.c))
    return EXIT_OK


def _cmd_diagnose_events(args: argparse.Namespace) -> int:
    data_path = Path(args.data)
    data = artifacts.read_dataset(data_path)
    spec = _spec_from_manifest(data_path)
    eta = args.eta
    if eta is None:
        eta = artifacts.read_manifest(data_path).get("noise", {}).get("eta", 0.0)
    report = check_events(data, mu_of(spec), args.delta, args.c, args.c_prime, eta=eta)
    payload = report.model_dump(mode="json")
    payload["minimal_passing_c"] = minimal_passing_c(report)
    payload["all_hold"] = report.all_hold()
    _emit(payload)
    return EXIT_OK


def _cmd_diagnose_assumptions(args: argparse.Namespace) -> int:
    spec = _model_spec(args)
    report = check_assumptions(spec, args.n, args.delta, args.eta, args.C, args.kappa)
    payload = report.model_dump(mode="json")
    payload["all_hold"] = report.all_hold()
    _emit(payload)
    return EXIT_OK


def _cmd_diagnose_risk(args: argparse.Namespace) -> int:
    classifier = artifacts.read_classifier(Path(args.classifier))
    data_path = Path(args.data)
    spec = _spec_from_manifest(data_path)
    noise = NoiseSpec.model_validate(artifacts.read_manifest(data_path).get("noise", {}))
    _emit(risk_report(classifier, spec, noise, args.m_test, args.seed, args.c))
    return EXIT_OK


def _sweep_config(args: argparse.Namespace) -> SweepConfig:
    if args.preset and args.config:
        raise ConfigurationError("choose either --preset or --config")
    if args.preset:
        base = preset(args.preset).model_dump()
    elif args.config:
        base = json.loads(Path(args.config).read_text(encoding="utf-8"))
    else:
        raise ConfigurationError("a sweep needs --preset or --config")

    overrides = {
        "name": getattr(args, "name", None),
        "trials": getattr(args, "trials", None),
        "base_seed": getattr(args, "seed", None),
        "m_test": getattr(args, "m_test", None),
        "run_gd": True if getattr(args, "run_gd", False) else None,
        "record_events": True if getattr(args, "record_events", False) else None,
    }
    base.update({key: value for key, value in overrides.items() if value is not None})
    return SweepConfig.model_validate(base)


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _sweep_config(args)
    out_dir = Path(args.out) if args.out else settings.output_dir / cfg.name
    if args.fresh and out_dir.exists():
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(cfg.model_dump_json(indent=2) + "\n", encoding="utf-8")

    result = run_sweep(cfg, journal_path=out_dir / "journal.jsonl", threads=args.threads)
    if not result.records:
        logger.error("sweep produced no records name=%s failures=%s", cfg.name, len(result.failures))
        return EXIT_RUNTIME
    artifacts.emit_csv(result, out_dir / "results.csv", include_timing=not args.no_timing)
    (out_dir / "aggregates.json").write_text(
        json.dumps([agg.model_dump(mode="json") for agg in result.aggregates], indent=2) + "\n",
        encoding="utf-8",
    )
    if not args.no_plot:
        emit_plot(result, out_dir / "plot.svg", train_curve=args.train_curve)
    _emit(
        {
            "out_dir": str(out_dir),
            "records": len(result.records),
            "failures": len(result.failures),
            "grid_points": len(result.aggregates),
        }
    )
    return EXIT_OK


def _cmd_plot(args: argparse.Namespace) -> int:
    cfg = _sweep_config(args)
    frame = artifacts.read_sweep_csv(Path(args.csv))
    plot_frame(frame, cfg, Path(args.out), train_curve=args.train_curve)
    _emit({"path": args.out})
    return EXIT_OK


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", help="JSON file with a full model specification.")
    parser.add_argument(
        "--model", choices=["gaussian_cc", "rare_weak", "boolean_rare_weak"], default="boolean_rare_weak"
    )
    parser.add_argument("--p", type=int, default=1000)
    parser.add_argument("--s", type=int, default=100)
    parser.add_argument("--gamma", type=float, default=0.2)
    parser.add_argument("--rotation-seed", type=int, default=None)


def _add_sweep_source_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=PRESET_NAMES)
    parser.add_argument("--config", help="JSON file with a sweep configuration.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m app.cli", description="Max-margin classification workbench.")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="Sample a labeled dataset to CSV.")
    _add_model_args(generate)
    generate.add_argument("--noise", choices=["none", "random_flip", "margin_targeted_flip"], default="random_flip")
    generate.add_argument("--eta", type=float, default=0.05)
    generate.add_argument("--n", type=int, default=100)
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--out", required=True)
    generate.set_defaults(handler=_cmd_generate)

    solve = commands.add_parser("solve", help="Exact max-margin classifier of a dataset.")
    solve.add_argument("--data", required=True)
    solve.add_argument("--out", required=True)
    solve.add_argument("--kkt-tol", type=float, default=1e-8)
    solve.set_defaults(handler=_cmd_solve)

    train = commands.add_parser("train", help="Gradient descent on the exponential loss.")
    train.add_argument("--data", required=True)
    train.add_argument("--out", required=True, help="Trace CSV.")
    train.add_argument("--losses-out", help="Optional CSV of per-example log-losses.")
    train.add_argument("--iters", type=int, default=10_000)
    train.add_argument("--stride", type=int, default=100)
    train.add_argument("--alpha", type=float, default=None, help="Fixed step size; default is 1/(n max|x|^2).")
    train.add_argument("--reference", help="Classifier JSON to measure the direction gap against.")
    train.add_argument("--gap-target", type=float, default=None)
    train.set_defaults(handler=_cmd_train)

    diagnose = commands.add_parser("diagnose", help="Bounds, reference risks and event checks.")
    checks = diagnose.add_subparsers(dest="check", required=True)

    bound = checks.add_parser("bound", help="Risk bound for given parameters.")
    bound.add_argument("--mu-norm-sq", type=float, default=None, help="Use the general bound with this ||mu||^2.")
    bound.add_argument("--gamma", type=float, default=0.2)
    bound.add_argument("--s", type=float, default=100)
    bound.add_argument("--p", type=float, required=True)
    bound.add_argument("--eta", type=float, default=0.05)
    bound.add_argument("--c", type=float, default=1.0)
    bound.set_defaults(handler=_cmd_diagnose_bound)

    bayes = checks.add_parser("bayes", help="Bayes reference error.")
    bayes.add_argument("--mu-norm", type=float, required=True)
    bayes.add_argument("--eta", type=float, default=0.05)
    bayes.add_argument("--c", type=float, default=1.0)
    bayes.set_defaults(handler=_cmd_diagnose_bayes)

    events = checks.add_parser("events", help="Check the high-probability events on a dataset.")
    events.add_argument("--data", required=True)
    events.add_argument("--delta", type=float, default=0.05)
    events.add_argument("--c", type=float, default=10.0)
    events.add_argument("--c-prime", type=float, default=0.05)
    events.add_argument("--eta", type=float, default=None, help="Defaults to the eta in the dataset manifest.")
    events.set_defaults(handler=_cmd_diagnose_events)

    assumptions = checks.add_parser("assumptions", help="Report the standing assumptions for a model.")
    _add_model_args(assumptions)
    assumptions.add_argument("--n", type=int, default=100)
    assumptions.add_argument("--delta", type=float, default=0.05)
    assumptions.add_argument("--eta", type=float, default=0.05)
    assumptions.add_argument("--C", type=float, default=10.0)
    assumptions.add_argument("--kappa", type=float, default=0.5)
    assumptions.set_defaults(handler=_cmd_diagnose_assumptions)

    risk = checks.add_parser("risk", help="Analytic and Monte Carlo risk of a classifier.")
    risk.add_argument("--classifier", required=True)
    risk.add_argument("--data", required=True, help="Dataset whose manifest names the model.")
    risk.add_argument("--m-test", type=int, default=settings.default_m_test)
    risk.add_argument("--seed", type=int, default=0)
    risk.add_argument("--c", type=float, default=1.0)
    risk.set_defaults(handler=_cmd_diagnose_risk)

    sweep = commands.add_parser("sweep", help="Run a resumable sweep.")
    _add_sweep_source_args(sweep)
    sweep.add_argument("--name")
    sweep.add_argument("--trials", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--m-test", type=int)
    sweep.add_argument("--threads", type=int)
    sweep.add_argument("--run-gd", action="store_true")
    sweep.add_argument("--record-events", action="store_true")
    sweep.add_argument("--out", help="Output directory; defaults to MML_OUTPUT_DIR/<name>.")
    sweep.add_argument("--fresh", action="store_true", help="Discard a previous journal instead of resuming.")
    sweep.add_argument("--no-timing", action="store_true", help="Leave wall_ms blank in the CSV.")
    sweep.add_argument("--no-plot", action="store_true")
    sweep.add_argument("--train-curve", action="store_true", help="Also plot mean train error, dashed.")
    sweep.set_defaults(handler=_cmd_sweep)

    plot = commands.add_parser("plot", help="Plot an existing sweep CSV.")
    _add_sweep_source_args(plot)
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--train-curve", action="store_true", help="Also plot mean train error, dashed.")
    plot.set_defaults(handler=_cmd_plot)

    return parser


def _dispatch(handler: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    try:
        return handler(args)
    except FileNotFoundError as exc:
        logger.error("missing input: %s", exc)
        return EXIT_CONFIG
    except ValueError as exc:
        # Covers pydantic ValidationError and ConfigurationError.
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (NotSeparable, DivergingLoss, SweepIOError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    return _dispatch(args.handler, args)


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
