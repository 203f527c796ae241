import numpy as np
import pytest

from robustcf.data import RatingMatrix, RatingScale


@pytest.fixture
def scale() -> RatingScale:
    return RatingScale(1, 5)


def matrix_from_triples(triples, m=None, n=None, scale=RatingScale(1, 5)) -> RatingMatrix:
    """Build a RatingMatrix from (user, item, rating) tuples."""
    users = [t[0] for t in triples]
    items = [t[1] for t in triples]
    ratings = [t[2] for t in triples]
    m = m if m is not None else max(users) + 1
    n = n if n is not None else max(items) + 1
    return RatingMatrix(m, n, users, items, ratings, scale=scale)


@pytest.fixture
def tiny_matrix() -> RatingMatrix:
    # 4 users x 3 items with mixed agreement patterns.
    return matrix_from_triples(
        [
            (0, 0, 5), (0, 1, 3), (0, 2, 1),
            (1, 0, 5), (1, 1, 3), (1, 2, 2),
            (2, 0, 1), (2, 1, 2), (2, 2, 5),
            (3, 0, 2), (3, 1, 2),
        ]
    )


def random_matrix(rng: np.random.Generator, m: int, n: int, density: float, scale=RatingScale(1, 5)) -> RatingMatrix:
    cells = [(u, i) for u in range(m) for i in range(n)]
    take = max(1, int(density * m * n))
    picked = rng.choice(len(cells), size=take, replace=False)
    triples = [
        (cells[c][0], cells[c][1], int(rng.integers(scale.min_rating, scale.max_rating + 1)))
        for c in picked
    ]
    return matrix_from_triples(triples, m=m, n=n, scale=scale)
