import numpy as np
import pytest

from robustcf.baselines import NMF, ItemKNN, RegSVD, SlopeOne, UserKNN
from robustcf.recommender import FitDivergedError
from robustcf.synth import synthetic_ratings

from .conftest import matrix_from_triples, random_matrix


def test_user_knn_identical_users_reproduce_ratings():
    pattern = [(0, 5), (1, 3), (2, 1)]
    triples = [(u, i, r) for u in range(4) for i, r in pattern]
    rm = matrix_from_triples(triples)
    model = UserKNN(k=2)
    model.fit(rm)
    for i, r in pattern:
        assert model.predict(0, i) == pytest.approx(r)


def test_user_knn_falls_back_to_user_mean():
    # item 2 rated only by the queried user
    rm = matrix_from_triples([(0, 0, 5), (0, 1, 3), (0, 2, 4), (1, 0, 5), (1, 1, 3)])
    model = UserKNN(k=2)
    model.fit(rm)
    assert model.predict(1, 2) == pytest.approx(rm.user_mean(1))


def test_user_knn_matches_hand_computation():
    # users 1..3 co-rate items 0..2 with user 0; user 0 has not rated item 3
    triples = [
        (0, 0, 4), (0, 1, 2), (0, 2, 3),
        (1, 0, 5), (1, 1, 3), (1, 2, 4), (1, 3, 5),
        (2, 0, 2), (2, 1, 4), (2, 2, 3), (2, 3, 2),
        (3, 0, 4), (3, 1, 2), (3, 2, 4), (3, 3, 4),
    ]
    rm = matrix_from_triples(triples)
    model = UserKNN(k=2)
    model.fit(rm)

    # textbook arithmetic, straight from the weighted-deviation formula
    means = {u: np.mean([r for uu, _, r in triples if uu == u]) for u in range(4)}
    sims = {}
    for v in (1, 2, 3):
        a = [r - means[0] for u, i, r in triples if u == 0 and i < 3]
        b = [r - means[v] for u, i, r in triples if u == v and i < 3]
        num = sum(x * y for x, y in zip(a, b))
        den = np.sqrt(sum(x * x for x in a) * sum(y * y for y in b))
        sims[v] = num / den
    top = sorted(sims, key=lambda v: -sims[v])[:2]
    rated = {(u, i): r for u, i, r in triples}
    expected = means[0] + sum(
        sims[v] * (rated[(v, 3)] - means[v]) for v in top
    ) / sum(abs(sims[v]) for v in top)
    assert model.predict(0, 3) == pytest.approx(expected, rel=1e-10)


def test_user_knn_similarity_symmetric_no_self():
    rng = np.random.default_rng(0)
    rm = random_matrix(rng, 10, 8, 0.5)
    model = UserKNN(k=3)
    model.fit(rm)
    finite = np.isfinite(model.sim)
    assert np.array_equal(finite, finite.T)
    assert np.allclose(model.sim[finite], model.sim.T[finite])
    assert not np.isfinite(np.diag(model.sim)).any()


def test_item_knn_perfect_twin():
    # items 0 and 1 get identical centered patterns from users 1..3;
    # user 0 rated only the twin (item 1) at 4
    triples = [(0, 1, 4)]
    for u, (r0, r1) in zip((1, 2, 3), ((5, 5), (2, 2), (4, 4))):
        triples += [(u, 0, r0), (u, 1, r1), (u, 2, 6 - r0)]
    rm = matrix_from_triples(triples)
    model = ItemKNN(k=2)
    model.fit(rm)
    assert model.sim[0, 1] == pytest.approx(1.0)
    assert model.predict(0, 0) == pytest.approx(4.0)


def test_item_knn_cold_user_gets_item_mean():
    rm = matrix_from_triples([(0, 0, 5), (1, 0, 3), (0, 1, 2), (1, 1, 2)], m=3)
    model = ItemKNN(k=2)
    model.fit(rm)
    assert model.predict(2, 0) == pytest.approx(4.0)


def test_item_knn_matches_direct_formula():
    rng = np.random.default_rng(5)
    rm = random_matrix(rng, 6, 5, 0.8)
    model = ItemKNN(k=2)
    model.fit(rm)
    user, item = 0, rm.n - 1
    user_means = {u: rm.user_mean(u) for u in range(rm.m)}

    def adjusted_cosine(i, j):
        num = den_i = den_j = 0.0
        count = 0
        for u in range(rm.m):
            ri, rj = rm.rating_of(u, i), rm.rating_of(u, j)
            if ri is None or rj is None:
                continue
            ci, cj = ri - user_means[u], rj - user_means[u]
            num += ci * cj
            den_i += ci * ci
            den_j += cj * cj
            count += 1
        if count < 2 or den_i <= 0 or den_j <= 0:
            return None
        return num / np.sqrt(den_i * den_j)

    rated = [i for i in rm.user_rows(user)[0] if i != item]
    scored = [(adjusted_cosine(item, int(j)), int(j)) for j in rated]
    scored = [(s, j) for s, j in scored if s is not None]
    scored.sort(key=lambda t: (-t[0], t[1]))
    top = scored[:2]
    if top and sum(abs(s) for s, _ in top) > 0:
        expected = sum(s * rm.rating_of(user, j) for s, j in top) / sum(abs(s) for s, _ in top)
        expected = float(np.clip(expected, 1, 5))
        assert model.predict(user, item) == pytest.approx(expected, rel=1e-10)


def test_slope_one_constant_deviation():
    triples = []
    for u, r in zip(range(3), (2, 3, 4)):
        triples += [(u, 0, r), (u, 1, r + 1)]
    triples.append((3, 0, 3))
    rm = matrix_from_triples(triples)
    model = SlopeOne()
    model.fit(rm)
    assert model.predict(3, 1) == pytest.approx(4.0)  # r_u0 + dev(1,0) = 3 + 1


def test_slope_one_no_coraters_falls_back_to_item_mean():
    rm = matrix_from_triples([(0, 0, 5), (1, 1, 3), (2, 1, 4)])
    model = SlopeOne()
    model.fit(rm)
    assert model.predict(0, 1) == pytest.approx(3.5)


def test_slope_one_worked_instance():
    # classic 3x3 example worked by hand:
    # dev(1,0) over users {0,1}: ((2-5)+(3-3))/2 = -1.5
    # dev(2,0) over user {0}:    (3-5)/1 = -2
    # predict(2, 0) from items 1 and 2 with co-rater counts 2 and 1:
    #   (2*(4 - (-1.5)) + 1*(2 - (-2))) / 3 = (11 + 4) / 3 = 5
    rm = matrix_from_triples(
        [(0, 0, 5), (0, 1, 2), (0, 2, 3), (1, 0, 3), (1, 1, 3), (2, 1, 4), (2, 2, 2)]
    )
    model = SlopeOne()
    model.fit(rm)
    assert model.dev[1, 0] == pytest.approx(-1.5)
    assert model.dev[2, 0] == pytest.approx(-2.0)
    assert model.predict(2, 0) == pytest.approx(5.0)


def test_reg_svd_rank_zero_is_bias_model():
    rng = np.random.default_rng(1)
    rm = random_matrix(rng, 8, 6, 0.6)
    model = RegSVD(rank=0, epochs=30, seed=3)
    model.fit(rm)
    for u in range(rm.m):
        for i in range(rm.n):
            expected = np.clip(model.mu + model.user_bias[u] + model.item_bias[i], 1, 5)
            assert model.predict(u, i) == pytest.approx(float(expected))


def test_reg_svd_loss_non_increasing_with_small_lr():
    rng = np.random.default_rng(2)
    rm = random_matrix(rng, 10, 10, 0.6)
    model = RegSVD(rank=4, lr=0.001, epochs=60, seed=0)
    model.fit(rm)
    diffs = np.diff(model.loss_history)
    assert (diffs <= 1e-9).all()


def test_reg_svd_constant_matrix():
    rm = matrix_from_triples([(u, i, 4) for u in range(6) for i in range(6)])
    model = RegSVD(seed=0)
    model.fit(rm)
    preds = model.predict_many(rm.users, rm.items)
    assert np.abs(preds - 4.0).max() < 0.05


def test_reg_svd_divergence_raises():
    rng = np.random.default_rng(3)
    rm = random_matrix(rng, 10, 10, 0.6)
    model = RegSVD(rank=4, lr=50.0, epochs=50, seed=0)
    with pytest.raises(FitDivergedError):
        model.fit(rm)


def test_reg_svd_deterministic_per_seed():
    rng = np.random.default_rng(4)
    rm = random_matrix(rng, 9, 7, 0.5)
    a = RegSVD(rank=3, epochs=20, seed=11)
    b = RegSVD(rank=3, epochs=20, seed=11)
    a.fit(rm)
    b.fit(rm)
    assert np.array_equal(a.user_factors, b.user_factors)
    assert np.array_equal(a.item_bias, b.item_bias)


def test_nmf_recovers_rank_one_matrix():
    rm = matrix_from_triples([(u, i, (u + 1) * (i + 1)) for u in range(2) for i in range(2)])
    model = NMF(rank=1, epochs=300, seed=0)
    model.fit(rm)
    assert model.loss_history[-1] < 1e-6
    assert model.predict(1, 1) == pytest.approx(4.0, abs=1e-3)


def test_nmf_factors_stay_nonnegative():
    rng = np.random.default_rng(6)
    rm = random_matrix(rng, 8, 8, 0.5)
    model = NMF(rank=3, epochs=50, seed=1)
    model.fit(rm)
    assert model.user_factors.min() >= model._FLOOR
    assert model.item_factors.min() >= model._FLOOR


def test_nmf_objective_non_increasing():
    rng = np.random.default_rng(7)
    rm = random_matrix(rng, 5, 5, 0.8)
    model = NMF(rank=2, epochs=80, seed=2)
    model.fit(rm)
    diffs = np.diff(model.loss_history)
    assert (diffs <= 1e-9).all()


def test_nmf_deterministic_per_seed():
    rng = np.random.default_rng(8)
    rm = random_matrix(rng, 7, 6, 0.5)
    a = NMF(rank=2, epochs=25, seed=5)
    b = NMF(rank=2, epochs=25, seed=5)
    a.fit(rm)
    b.fit(rm)
    assert np.array_equal(a.user_factors, b.user_factors)


@pytest.mark.parametrize(
    "builder",
    [lambda: UserKNN(k=3), lambda: ItemKNN(k=3), SlopeOne, lambda: RegSVD(rank=3, epochs=15), lambda: NMF(rank=3, epochs=15)],
)
def test_predictions_stay_inside_scale(builder):
    rm = synthetic_ratings(25, 20, 260, seed=9)
    model = builder()
    model.fit(rm)
    rng = np.random.default_rng(0)
    users = rng.integers(0, rm.m, size=2500)
    items = rng.integers(0, rm.n, size=2500)
    preds = model.predict_many(users, items)
    assert preds.min() >= 1.0 and preds.max() <= 5.0
