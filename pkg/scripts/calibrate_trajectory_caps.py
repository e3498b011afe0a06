#!/usr/bin/env python3
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

ROOT_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from app.core.seeding import mix_seed  # noqa: E402
from app.schemas.gdflow import GdConfig  # noqa: E402
from app.schemas.harness import GridPoint  # noqa: E402
from app.services.datagen import apply_noise, mu_of, sample_clean  # noqa: E402
from app.services.diagnostics import margin_ratio  # noqa: E402
from app.services.gdflow import train_gd  # noqa: E402
from app.services.harness import DATA_STREAM, NOISE_STREAM  # noqa: E402
from app.services.solver import NotSeparable, max_margin  # noqa: E402

logger = logging.getLogger("calibrate_trajectory_caps")

A_MAX_CAP_FACTOR = 2.0
MARGIN_RATIO_FLOOR_FACTOR = 0.5


@dataclass
class CalibrationStats:
    seeds: list[int] = field(default_factory=list)
    not_separable: int = 0
    sup_a_max: float = 1.0
    min_margin_ratio: float | None = None

    def caps(self) -> dict[str, float | None]:
        return {
            "a_max_cap": A_MAX_CAP_FACTOR * self.sup_a_max,
            "margin_ratio_floor": (
                None if self.min_margin_ratio is None else MARGIN_RATIO_FLOOR_FACTOR * self.min_margin_ratio
            ),
        }


def run_calibration(
    point: GridPoint,
    *,
    seeds: range,
    gd_iters: int,
    verbose: bool = False,
) -> CalibrationStats:
    if point.p < 20 * point.n:
        raise ValueError("calibration needs p >= 20 n")
    if gd_iters <= 0:
        raise ValueError("--gd-iters must be greater than 0")

    stats = CalibrationStats()
    spec = point.model_spec()
    mu = mu_of(spec)
    cfg = GdConfig(max_iters=gd_iters, log_stride=max(1, gd_iters // 50))
    for seed in seeds:
        stats.seeds.append(seed)
        clean = sample_clean(spec, point.n, mix_seed(seed, DATA_STREAM))
        data = apply_noise(clean, point.noise_spec(), mix_seed(seed, NOISE_STREAM), mu=mu)
        try:
            classifier = max_margin(data)
        except NotSeparable:
            stats.not_separable += 1
            logger.warning("seed not separable seed=%s", seed)
            continue

        ratio = margin_ratio(classifier, mu, point.p)
        _, trace = train_gd(data, cfg, classifier)
        stats.sup_a_max = max(stats.sup_a_max, trace.sup_a_max)
        if stats.min_margin_ratio is None or ratio < stats.min_margin_ratio:
            stats.min_margin_ratio = ratio
        if verbose:
            logger.info(
                "seed done seed=%s sup_a_max=%s margin_ratio=%s gap=%s",
                seed,
                trace.sup_a_max,
                ratio,
                trace.final.direction_gap,
            )
    return stats


def _parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Record the loss-ratio supremum and the smallest margin ratio over a seed range."
    )
    parser.add_argument("--n", type=int, default=20)
    parser.add_argument("--p", type=int, default=400)
    parser.add_argument("--s", type=int, default=100)
    parser.add_argument("--gamma", type=float, default=0.2)
    parser.add_argument("--eta", type=float, default=0.05)
    parser.add_argument("--seed-start", type=int, default=0)
    parser.add_argument("--seeds", type=int, default=20, help="Number of consecutive seeds.")
    parser.add_argument("--gd-iters", type=int, default=5_000)
    parser.add_argument("--out", type=Path, required=True, help="JSON file for the calibrated caps.")
    parser.add_argument("--verbose", action="store_true", help="Log per-seed results.")
    args = parser.parse_args()
    if args.seeds <= 0:
        parser.error("--seeds must be greater than 0")
    return args


def _print_summary(stats: CalibrationStats, out: Path) -> None:
    caps = stats.caps()
    print("Trajectory cap calibration complete")
    print(f"seeds: {len(stats.seeds)}")
    print(f"not_separable: {stats.not_separable}")
    print(f"sup_a_max: {stats.sup_a_max}")
    print(f"min_margin_ratio: {stats.min_margin_ratio}")
    print(f"a_max_cap: {caps['a_max_cap']}")
    print(f"margin_ratio_floor: {caps['margin_ratio_floor']}")
    print(f"written: {out}")


def main() -> int:
    args = _parse_args()
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    point = GridPoint(
        grid_id=0,
        model="boolean_rare_weak",
        noise="random_flip",
        n=args.n,
        p=args.p,
        s=args.s,
        gamma=args.gamma,
        eta=args.eta,
    )
    stats = run_calibration(
        point,
        seeds=range(args.seed_start, args.seed_start + args.seeds),
        gd_iters=args.gd_iters,
        verbose=args.verbose,
    )
    payload = {"point": point.model_dump(mode="json"), "gd_iters": args.gd_iters, **asdict(stats), **stats.caps()}
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _print_summary(stats, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
