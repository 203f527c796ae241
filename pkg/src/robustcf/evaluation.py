"""Accuracy and robustness measurement.

The central protocol: fit a method on the clean training split, score MAE
and RMSE on the held-out test entries ("before"), inject attack profiles
into the training data only, refit from scratch, and rescore the identical
test entries ("after"). Growth is the percentage increase of MAE. Trials
vary the split, the model seed, and the attack draw; reported numbers are
arithmetic means over trials. Attackers can never reach the test set (they
are appended past the genuine user range and asserted absent).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import data as data_mod
from .attacks import AttackSpec, generate, inject, resolve
from .baselines import NMF, ItemKNN, RegSVD, SlopeOne, UserKNN
from .data import DatasetSplit, RatingMatrix
from .profile_model import GraphProfileRecommender
from .recommender import Recommender
from .seeding import substream_seed

Factory = Callable[[int], Recommender]


def mae(predictions, truth) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predictions.size == 0 or predictions.shape != truth.shape:
        raise ValueError("predictions and truth must be nonempty and aligned")
    return float(np.abs(predictions - truth).mean())


def rmse(predictions, truth) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predictions.size == 0 or predictions.shape != truth.shape:
        raise ValueError("predictions and truth must be nonempty and aligned")
    return float(np.sqrt(((predictions - truth) ** 2).mean()))


def score(model: Recommender, test: RatingMatrix) -> tuple[float, float]:
    preds = model.predict_many(test.users, test.items)
    return mae(preds, test.ratings), rmse(preds, test.ratings)


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    split_seed: int
    fit_seed: int
    attack_seed: int
    mae_before: float
    rmse_before: float
    mae_after: float
    rmse_after: float


@dataclass
class ExperimentReport:
    """Before/after-attack accuracy for one method, averaged over trials."""

    method: str
    dataset: str
    attack: AttackSpec
    trials: list[TrialOutcome] = field(default_factory=list)
    wall_time_s: float = 0.0

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    @property
    def mae_before(self) -> float:
        return float(np.mean([t.mae_before for t in self.trials]))

    @property
    def mae_after(self) -> float:
        return float(np.mean([t.mae_after for t in self.trials]))

    @property
    def rmse_before(self) -> float:
        return float(np.mean([t.rmse_before for t in self.trials]))

    @property
    def rmse_after(self) -> float:
        return float(np.mean([t.rmse_after for t in self.trials]))

    @property
    def growth_pct(self) -> float:
        return 100.0 * (self.mae_after - self.mae_before) / self.mae_before


@dataclass(frozen=True)
class SweepPoint:
    attack_size: float
    mae_after_trials: tuple[float, ...]

    @property
    def mae_after_mean(self) -> float:
        return float(np.mean(self.mae_after_trials))

    @property
    def mae_after_stddev(self) -> float:
        if len(self.mae_after_trials) < 2:
            return 0.0
        return float(np.std(self.mae_after_trials, ddof=1))


@dataclass
class SweepCurve:
    """MAE-after as a function of attack size (sizes strictly increasing)."""

    method: str
    dataset: str
    points: list[SweepPoint]
    mae_before_trials: tuple[float, ...] = ()
    wall_time_s: float = 0.0

    def __post_init__(self):
        sizes = [p.attack_size for p in self.points]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("attack sizes must be strictly increasing")

    @property
    def mae_before_mean(self) -> float:
        return float(np.mean(self.mae_before_trials))

    def spread(self) -> float:
        means = [p.mae_after_mean for p in self.points]
        return max(means) - min(means)


def _trial_split(
    split: DatasetSplit,
    source: RatingMatrix | None,
    fractions,
    root_seed: int,
    trial: int,
) -> tuple[DatasetSplit, int]:
    """Re-split per trial when a source matrix is given, else reuse the split."""
    if source is None:
        return split, split.seed
    seed = substream_seed(root_seed, "trial", trial, "split")
    return data_mod.split(source, fractions, seed), seed


def _assert_no_leakage(attacked: RatingMatrix, test: RatingMatrix) -> None:
    if attacked.attacker_users and test.users.size:
        test_users = set(int(u) for u in np.unique(test.users))
        overlap = test_users & attacked.attacker_users
        if overlap:
            raise AssertionError(f"attacker users leaked into the test set: {sorted(overlap)[:5]}")


def _trial_attack(attack: AttackSpec, train: RatingMatrix, root_seed: int, trial: int, size_index: int) -> AttackSpec:
    """Resolve targets and derive the draw seed for one (trial, size) cell.

    Targets depend on the trial but not on the attack size, so a growing
    attack within a trial keeps pushing the same items.
    """
    targets_seed = substream_seed(root_seed, "trial", trial, "targets", attack.seed)
    resolved = resolve(replace(attack, seed=targets_seed), train)
    return replace(resolved, seed=substream_seed(root_seed, "trial", trial, "attack", attack.seed, size_index))


def run_before_after(
    factory: Factory,
    split: DatasetSplit,
    attack: AttackSpec,
    trials: int = 10,
    *,
    dataset: str = "dataset",
    root_seed: int = 0,
    source: RatingMatrix | None = None,
    fractions=(0.8, 0.1, 0.1),
    method: str = "method",
) -> ExperimentReport:
    """The before/after-attack protocol, averaged over trials.

    Each trial fits a fresh model on clean training data, scores the test
    set, injects freshly drawn attack profiles into the training data only,
    refits from scratch, and rescores the same test set. When ``source`` is
    given the data is re-split per trial; otherwise every trial reuses
    ``split`` and only the model and attack seeds vary. Seed streams are
    shared with ``run_sweep``, so a one-size sweep reproduces this exactly.
    """
    started = time.perf_counter()
    report = ExperimentReport(method=method, dataset=dataset, attack=attack)
    for t in range(trials):
        split_t, split_seed = _trial_split(split, source, fractions, root_seed, t)
        fit_seed = substream_seed(root_seed, "trial", t, "fit")

        before = factory(fit_seed)
        before.fit(split_t.train)
        mae_b, rmse_b = score(before, split_t.test)

        spec_t = _trial_attack(attack, split_t.train, root_seed, t, 0)
        attacked = inject(split_t.train, generate(spec_t, split_t.train))
        _assert_no_leakage(attacked, split_t.test)
        after = factory(fit_seed)
        after.fit(attacked)
        mae_a, rmse_a = score(after, split_t.test)

        report.trials.append(
            TrialOutcome(t, split_seed, fit_seed, spec_t.seed, mae_b, rmse_b, mae_a, rmse_a)
        )
    report.wall_time_s = time.perf_counter() - started
    return report


def run_sweep(
    factory: Factory,
    split: DatasetSplit,
    base_attack: AttackSpec,
    sizes,
    trials: int = 10,
    *,
    dataset: str = "dataset",
    root_seed: int = 0,
    source: RatingMatrix | None = None,
    fractions=(0.8, 0.1, 0.1),
    method: str = "method",
) -> SweepCurve:
    """MAE-after across attack sizes, reusing each trial's clean fit.

    Within a trial the target set is resolved once and kept fixed while the
    attack grows, so the curve isolates the effect of attack size.
    """
    sizes = [float(s) for s in sizes]
    if any(not 0 < s <= 1 for s in sizes):
        raise ValueError("attack sizes must lie in (0, 1]")
    if sorted(set(sizes)) != sizes:
        raise ValueError("attack sizes must be strictly increasing")

    started = time.perf_counter()
    before_trials = []
    per_size: dict[float, list[float]] = {s: [] for s in sizes}
    for t in range(trials):
        split_t, _ = _trial_split(split, source, fractions, root_seed, t)
        fit_seed = substream_seed(root_seed, "trial", t, "fit")
        before = factory(fit_seed)
        before.fit(split_t.train)
        mae_b, _ = score(before, split_t.test)
        before_trials.append(mae_b)

        for s_idx, size in enumerate(sizes):
            spec_s = _trial_attack(
                replace(base_attack, attack_size=size), split_t.train, root_seed, t, s_idx
            )
            attacked = inject(split_t.train, generate(spec_s, split_t.train))
            _assert_no_leakage(attacked, split_t.test)
            after = factory(fit_seed)
            after.fit(attacked)
            mae_a, _ = score(after, split_t.test)
            per_size[size].append(mae_a)

    points = [SweepPoint(s, tuple(per_size[s])) for s in sizes]
    return SweepCurve(
        method=method,
        dataset=dataset,
        points=points,
        mae_before_trials=tuple(before_trials),
        wall_time_s=time.perf_counter() - started,
    )


def prediction_shift(
    factory: Factory,
    split: DatasetSplit,
    attack: AttackSpec,
    *,
    root_seed: int = 0,
) -> float:
    """Mean change of target-item predictions for test users after injection.

    Positive values mean the push succeeded.
    """
    fit_seed = substream_seed(root_seed, "shift", "fit")
    spec = resolve(
        replace(attack, seed=substream_seed(root_seed, "shift", "attack", attack.seed)),
        split.train,
    )
    before = factory(fit_seed)
    before.fit(split.train)
    attacked = inject(split.train, generate(spec, split.train))
    _assert_no_leakage(attacked, split.test)
    after = factory(fit_seed)
    after.fit(attacked)

    test_users = np.unique(split.test.users)
    targets = np.array(spec.target_items, dtype=np.int64)
    uu = np.repeat(test_users, targets.size)
    ii = np.tile(targets, test_users.size)
    return float((after.predict_many(uu, ii) - before.predict_many(uu, ii)).mean())


# --- method registry -------------------------------------------------------

_SEEDED = {"gpf", "reg_svd", "nmf"}
_BUILDERS = {
    "gpf": GraphProfileRecommender,
    "user_knn": UserKNN,
    "item_knn": ItemKNN,
    "slope_one": SlopeOne,
    "reg_svd": RegSVD,
    "nmf": NMF,
}

METHOD_NAMES = tuple(_BUILDERS)


def method_factory(name: str, **hyper) -> Factory:
    """A seed -> fresh-Recommender factory for a registered method name."""
    if name not in _BUILDERS:
        raise KeyError(f"unknown method {name!r}; registered: {sorted(_BUILDERS)}")
    builder = _BUILDERS[name]

    def build(seed: int) -> Recommender:
        if name in _SEEDED:
            return builder(seed=seed, **hyper)
        return builder(**hyper)

    return build


def register_method(name: str, builder, seeded: bool = True) -> None:
    """Extension hook so additional comparison methods can be plugged in."""
    _BUILDERS[name] = builder
    if seeded:
        _SEEDED.add(name)


# --- report output ---------------------------------------------------------

REPORT_HEADER = "method,dataset,trials,mae_before,mae_after,growth_pct,rmse_before,rmse_after"
SWEEP_HEADER = "method,attack_size,mae_after_mean,mae_after_stddev"


def write_reports_csv(reports, path) -> None:
    lines = [REPORT_HEADER]
    for r in reports:
        lines.append(
            f"{r.method},{r.dataset},{r.n_trials},{r.mae_before!r},{r.mae_after!r},"
            f"{r.growth_pct!r},{r.rmse_before!r},{r.rmse_after!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_sweeps_csv(curves, path) -> None:
    lines = [SWEEP_HEADER]
    for curve in curves:
        for p in curve.points:
            lines.append(f"{curve.method},{p.attack_size!r},{p.mae_after_mean!r},{p.mae_after_stddev!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def summary_table(reports) -> str:
    """Human-readable Before / After / Growth table."""
    rows = [f"{'method':<12} {'before':>8} {'after':>8} {'growth':>8}"]
    for r in reports:
        rows.append(
            f"{r.method:<12} {r.mae_before:>8.3f} {r.mae_after:>8.3f} {r.growth_pct:>7.1f}%"
        )
    return "\n".join(rows)
