"""Command-line front end.

Commands: ``ingest`` (dataset summary), ``fit`` (train and save the graph
profile model), ``attack`` (before/after-attack report), ``sweep`` (MAE
versus attack size). Every run echoes its fully resolved configuration into
the output directory; logs go to stderr, data to files.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 fit failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import evaluation
from .attacks import AttackSpec
from .config import ConfigError, RunConfig, apply_overrides, load_config, write_config
from .data import DataFormatError, RatingScale, parse_ratings, save_id_maps, split
from .graph import build_graph
from .profile_model import (
    FitConfig,
    fit,
    save_model,
    select_user_reg_weight,
)
from .recommender import FitDivergedError
from .seeding import substream_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_FIT = 4

log = logging.getLogger("robustcf")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustcf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="parse a rating file and print summary statistics")
    ingest.add_argument("path")
    ingest.add_argument("--format", default="tsv", choices=("tsv", "csv"))
    ingest.add_argument("--min-rating", type=int, default=1)
    ingest.add_argument("--max-rating", type=int, default=5)

    for name, help_text in (
        ("fit", "train the graph profile model and save it"),
        ("attack", "run the before/after-attack report for all configured methods"),
        ("sweep", "run the attack-size sweep for all configured methods"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", default=None, help="INI config file; defaults apply when omitted")
        cmd.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override one config value (repeatable)",
        )
        cmd.add_argument("--data", default=None, help="shortcut for --set data.path=...")
        cmd.add_argument("--output-dir", default=None, help="shortcut for --set run.output_dir=...")
    return parser


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = list(args.overrides)
    if args.data:
        overrides.append(f"data.path={args.data}")
    if args.output_dir:
        overrides.append(f"run.output_dir={args.output_dir}")
    return apply_overrides(config, overrides)


def _load_dataset(config: RunConfig):
    if not config.data_path:
        raise ConfigError("data.path is required (use --data or the config file)")
    scale = RatingScale(config.min_rating, config.max_rating)
    return parse_ratings(config.data_path, fmt=config.data_format, scale=scale)


def _fit_config(config: RunConfig, seed: int) -> FitConfig:
    return FitConfig(
        epsilon=config.epsilon,
        max_sweeps=config.max_sweeps,
        restarts=config.restarts,
        reg_mode=config.reg_mode,
        denom_scope=config.denom_scope,
        floor=config.floor,
        seed=seed,
    )


def _resolve_weight(config: RunConfig, ratings) -> tuple[float, RunConfig]:
    """Pick the graph blend weight on a clean validation split unless pinned."""
    if config.user_reg_weight is not None:
        log.info("grid search skipped (user_reg_weight pinned to %s)", config.user_reg_weight)
        return config.user_reg_weight, config
    select_split = split(ratings, config.fractions, substream_seed(config.seed, "weight-select", "split"))
    user_graph = build_graph(select_split.train, "users", k=min(config.graph_user_k, select_split.train.m - 1))
    item_graph = build_graph(select_split.train, "items", k=min(config.graph_item_k, select_split.train.n - 1))
    weight, table = select_user_reg_weight(
        select_split.train,
        select_split.validation,
        user_graph,
        item_graph,
        _fit_config(config, substream_seed(config.seed, "weight-select", "fit")),
        grid=config.weight_grid,
    )
    for w, err in table:
        log.info("weight grid: %.2f -> validation MAE %.4f", w, err)
    log.info("selected user_reg_weight=%s on the clean validation split", weight)
    return weight, replace(config, user_reg_weight=weight)


def _method_factory(config: RunConfig, name: str, weight: float):
    if name == "gpf":
        base = _fit_config(config, 0)
        return evaluation.method_factory(
            "gpf",
            user_reg_weight=weight,
            user_k=config.graph_user_k,
            item_k=config.graph_item_k,
            config=base,
        )
    hyper = {
        "user_knn": {"k": config.user_knn_k},
        "item_knn": {"k": config.item_knn_k},
        "slope_one": {},
        "reg_svd": {
            "rank": config.svd_rank,
            "lr": config.svd_lr,
            "reg": config.svd_reg,
            "epochs": config.svd_epochs,
        },
        "nmf": {"rank": config.nmf_rank, "epochs": config.nmf_epochs},
    }[name]
    return evaluation.method_factory(name, **hyper)


def _attack_spec(config: RunConfig) -> AttackSpec:
    return AttackSpec(
        strategy=config.attack_strategy,
        attack_size=config.attack_size,
        filler_size=config.filler_size,
        target_count=config.target_count,
        popular_count=config.popular_count,
        seed=0,
    )


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    scale = RatingScale(args.min_rating, args.max_rating)
    ratings = parse_ratings(args.path, fmt=args.format, scale=scale)
    print(f"users        {ratings.m}")
    print(f"items        {ratings.n}")
    print(f"entries      {ratings.n_entries}")
    print(f"density      {ratings.density_pct():.2f}%")
    if ratings.n_entries:
        print(f"global mean  {ratings.global_mean():.4f}")
    return EXIT_OK


def cmd_fit(args) -> int:
    config = _resolve_config(args)
    ratings = _load_dataset(config)
    out = _out_dir(config)
    weight, config = _resolve_weight(config, ratings)

    base_split = split(ratings, config.fractions, substream_seed(config.seed, "base-split"))
    train = base_split.train
    user_graph = build_graph(train, "users", k=min(config.graph_user_k, train.m - 1))
    item_graph = build_graph(train, "items", k=min(config.graph_item_k, train.n - 1))
    model = fit(train, user_graph, item_graph, weight, _fit_config(config, substream_seed(config.seed, "fit")))

    save_model(model, out / "model.json")
    save_id_maps(ratings, out, prefix="")
    with (out / "fit_log.txt").open("w", encoding="utf-8") as fh:
        fh.write(f"restart {model.fit_info.restart} converged={model.fit_info.converged}\n")
        for h in model.fit_info.history:
            fh.write(
                f"sweep {h['sweep']}: user_residual={h['user_residual']!r} "
                f"item_residual={h['item_residual']!r} objective={h['objective']!r}\n"
            )
    write_config(config, out / "run_config.ini")
    log.info(
        "fit done: converged=%s sweeps=%d objective=%.3f",
        model.fit_info.converged,
        model.fit_info.sweeps,
        model.fit_info.objective,
    )
    print(f"model written to {out / 'model.json'}")
    print(f"converged={model.fit_info.converged} sweeps={model.fit_info.sweeps}")
    return EXIT_OK


def _run_protocol(args, sweep: bool) -> int:
    config = _resolve_config(args)
    ratings = _load_dataset(config)
    out = _out_dir(config)
    weight = 0.5
    if "gpf" in config.methods:
        weight, config = _resolve_weight(config, ratings)
    write_config(config, out / "run_config.ini")

    base_split = split(ratings, config.fractions, substream_seed(config.seed, "base-split"))
    source = ratings if config.resplit_per_trial else None
    spec = _attack_spec(config)

    reports, curves, trial_rows = [], [], []
    failure: Exception | None = None
    for name in config.methods:
        factory = _method_factory(config, name, weight)
        log.info("running %s (%s)", name, "sweep" if sweep else "before/after")
        try:
            if sweep:
                curve = evaluation.run_sweep(
                    factory,
                    base_split,
                    spec,
                    config.sweep_sizes,
                    trials=config.trials,
                    dataset=config.dataset_name,
                    root_seed=config.seed,
                    source=source,
                    fractions=config.fractions,
                    method=name,
                )
                curves.append(curve)
                log.info("%s: before=%.4f spread=%.4f", name, curve.mae_before_mean, curve.spread())
            else:
                report = evaluation.run_before_after(
                    factory,
                    base_split,
                    spec,
                    trials=config.trials,
                    dataset=config.dataset_name,
                    root_seed=config.seed,
                    source=source,
                    fractions=config.fractions,
                    method=name,
                )
                reports.append(report)
                trial_rows.append({"method": name, "trials": [asdict(t) for t in report.trials]})
                log.info(
                    "%s: before=%.4f after=%.4f growth=%.1f%%",
                    name,
                    report.mae_before,
                    report.mae_after,
                    report.growth_pct,
                )
        except Exception as exc:  # flush partial results below, then propagate
            failure = exc
            log.error("method %s failed: %s", name, exc)
            break

    if sweep and curves:
        evaluation.write_sweeps_csv(curves, out / "sweep.csv")
        summary = "\n".join(
            f"{c.method:<12} before={c.mae_before_mean:.4f} "
            + " ".join(f"{p.attack_size:g}:{p.mae_after_mean:.4f}" for p in c.points)
            for c in curves
        )
        (out / "summary.txt").write_text(summary + "\n", encoding="utf-8")
        print(summary)
    if not sweep and reports:
        evaluation.write_reports_csv(reports, out / "report.csv")
        (out / "trials.json").write_text(json.dumps(trial_rows, indent=1), encoding="utf-8")
        table = evaluation.summary_table(reports)
        (out / "summary.txt").write_text(table + "\n", encoding="utf-8")
        print(table)

    if failure is not None:
        raise failure
    return EXIT_OK


def cmd_attack(args) -> int:
    return _run_protocol(args, sweep=False)


def cmd_sweep(args) -> int:
    return _run_protocol(args, sweep=True)


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"ingest": cmd_ingest, "fit": cmd_fit, "attack": cmd_attack, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError, IsADirectoryError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except FitDivergedError as exc:
        log.error("fit failure: %s", exc)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
