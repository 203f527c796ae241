import numpy as np
import pytest

from robustcf.attacks import (
    FILLER_SIGMA,
    AttackProfileSet,
    AttackSpec,
    export_attack_metadata,
    export_profiles,
    generate,
    inject,
    popular_items,
    resolve,
    select_targets,
)
from robustcf.synth import synthetic_ratings

from .conftest import matrix_from_triples, random_matrix


@pytest.fixture(scope="module")
def base() -> object:
    return synthetic_ratings(40, 30, 520, seed=2)


def test_select_targets_deterministic(base):
    a = select_targets(base, count=5, seed=9)
    b = select_targets(base, count=5, seed=9)
    assert a == b
    assert len(set(a)) == 5
    assert all(base.item_rating_counts()[i] > 0 for i in a)


def test_select_targets_all_items():
    rm = matrix_from_triples([(0, i, 3) for i in range(6)], m=1, n=6)
    assert select_targets(rm, count=6, seed=0) == list(range(6))


def test_select_targets_rejects_too_many(base):
    rated = int((base.item_rating_counts() > 0).sum())
    with pytest.raises(ValueError):
        select_targets(base, count=rated + 1, seed=0)


def test_spec_validation():
    with pytest.raises(ValueError):
        AttackSpec(strategy="nuke")
    with pytest.raises(ValueError):
        AttackSpec(attack_size=0.0)
    with pytest.raises(ValueError):
        AttackSpec(target_items=())


def test_resolve_defaults(base):
    spec = resolve(AttackSpec(strategy="average", attack_size=0.5, seed=3), base)
    assert spec.filler_size == int(round(base.n_entries / base.m))
    assert len(spec.target_items) == spec.target_count
    spec_b = resolve(AttackSpec(strategy="bandwagon", seed=3), base)
    assert len(spec_b.popular_items) == spec_b.popular_count
    assert not set(spec_b.popular_items) & set(spec_b.target_items)


def test_popular_items_ranked_by_count(base):
    counts = base.item_rating_counts()
    top = popular_items(base, 3)
    assert counts[top[0]] == counts.max()
    assert len(top) == 3


def test_generate_profile_counts(base):
    spec = AttackSpec(strategy="random", attack_size=1.0, filler_size=4, target_count=3, seed=1)
    profiles = generate(spec, base)
    assert profiles.n_profiles == base.m
    half = generate(AttackSpec(strategy="random", attack_size=0.5, filler_size=4, target_count=3, seed=1), base)
    assert half.n_profiles == round(0.5 * base.m)


def test_generate_target_coverage_and_filler_counts(base):
    spec = AttackSpec(strategy="average", attack_size=0.4, filler_size=6, target_count=4, seed=5)
    profiles = generate(spec, base)
    targets = set(profiles.spec.target_items)
    for t in range(profiles.n_profiles):
        items, ratings = profiles.profile(t)
        assert len(items) == 4 + 6
        by_item = dict(zip(items.tolist(), ratings.tolist()))
        assert set(by_item) >= targets
        assert all(by_item[i] == 5 for i in targets)
        fillers = [i for i in items.tolist() if i not in targets]
        assert len(fillers) == 6
        assert not set(fillers) & targets


def test_generate_values_integral_in_scale(base):
    for strategy in ("random", "average", "bandwagon"):
        spec = AttackSpec(
            strategy=strategy, attack_size=0.3, filler_size=8, target_count=5, popular_count=3, seed=7
        )
        profiles = generate(spec, base)
        assert profiles.ratings.dtype.kind == "i"
        assert profiles.ratings.min() >= 1 and profiles.ratings.max() <= 5


def test_generate_deterministic(base):
    spec = AttackSpec(strategy="average", attack_size=0.3, filler_size=5, seed=11)
    a = generate(spec, base)
    b = generate(spec, base)
    assert np.array_equal(a.items, b.items)
    assert np.array_equal(a.ratings, b.ratings)


def test_generate_bandwagon_popular_at_max(base):
    spec = AttackSpec(strategy="bandwagon", attack_size=0.2, filler_size=3, popular_count=4, seed=2)
    profiles = generate(spec, base)
    pop = set(profiles.spec.popular_items)
    for t in range(profiles.n_profiles):
        items, ratings = profiles.profile(t)
        by_item = dict(zip(items.tolist(), ratings.tolist()))
        assert all(by_item[i] == 5 for i in pop)


def test_average_attack_clamps_at_top():
    # the single filler item has an all-5 history, so draws center at 5
    rm = matrix_from_triples(
        [(u, 0, 5) for u in range(4)] + [(u, 1, (u % 5) + 1) for u in range(4)], n=2
    )
    spec = AttackSpec(strategy="average", attack_size=25.0, filler_size=1, target_items=(1,), seed=0)
    profiles = generate(spec, rm, keep_raw=True)
    filler_mask = ~np.isnan(profiles.raw_filler_values)
    assert profiles.ratings[filler_mask].max() <= 5
    raw = profiles.raw_filler_values[filler_mask]
    assert abs(raw.mean() - 5.0) < 0.1  # centered at the item mean before clamping


def test_generate_rejects_oversized_filler(base):
    spec = AttackSpec(strategy="random", filler_size=base.n, target_count=2, seed=0)
    with pytest.raises(ValueError):
        generate(spec, base)


def test_filler_draw_distribution():
    # every profile rates the one eligible filler item; raw draws should
    # follow a normal around the item mean with sigma 1.1
    rm = matrix_from_triples([(u, 0, 3) for u in range(10)] + [(u, 1, 4) for u in range(10)], n=2)
    n_draws = 20000
    spec = AttackSpec(
        strategy="average", attack_size=n_draws / rm.m, filler_size=1, target_items=(0,), seed=4
    )
    profiles = generate(spec, rm, keep_raw=True)
    raw = profiles.raw_filler_values[~np.isnan(profiles.raw_filler_values)]
    assert raw.size == n_draws
    assert abs(raw.mean() - 4.0) < 3 * FILLER_SIGMA / np.sqrt(n_draws)
    assert abs(raw.std(ddof=1) - FILLER_SIGMA) < 0.05 * FILLER_SIGMA


def test_inject_empty_profile_set_is_identity(base):
    spec = resolve(AttackSpec(attack_size=1e-9, filler_size=2, target_count=2, seed=0), base)
    profiles = generate(spec, base)
    assert profiles.n_profiles == 0
    out = inject(base, profiles)
    assert out is base


def test_inject_appends_attackers(base):
    profiles = generate(AttackSpec(attack_size=0.25, filler_size=5, seed=3), base)
    out = inject(base, profiles)
    assert out.m - base.m == profiles.n_profiles
    assert out.attacker_users == frozenset(range(base.m, out.m))
    # genuine entries untouched
    genuine = {(int(u), int(i), int(r)) for u, i, r in zip(base.users, base.items, base.ratings)}
    kept = {
        (int(u), int(i), int(r))
        for u, i, r in zip(out.users, out.items, out.ratings)
        if int(u) < base.m
    }
    assert kept == genuine


def test_exports(tmp_path, base):
    profiles = generate(AttackSpec(attack_size=0.1, filler_size=2, target_count=2, seed=1), base)
    out = inject(base, profiles)
    ppath = tmp_path / "profiles.tsv"
    export_profiles(profiles, ppath)
    lines = ppath.read_text().splitlines()
    assert len(lines) == profiles.items.size
    assert lines[0].startswith("attacker:0\t")
    mpath = tmp_path / "attackers.txt"
    export_attack_metadata(out, mpath)
    listed = [int(x) for x in mpath.read_text().split()]
    assert listed == sorted(out.attacker_users)
