import math

import numpy as np
import pytest

from conftest import random_body, random_unit
from grid_oracle import GridOracle
from pabandits.errors import ProtocolViolation
from pabandits.geometry import (
    ConvexBody,
    DirectionBasis,
    argmax_point,
    centroid_cyl,
    cut,
    in_cylindrification,
    interior_point,
    projected_diameter,
    prune,
    sample_projected,
    small_direction_threshold,
    support,
    update_small_directions,
    widths,
)

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def box(center, half):
    d = len(center)
    G = np.vstack([np.eye(d), -np.eye(d)])
    b = np.concatenate([np.asarray(center) + half, -(np.asarray(center) - half)])
    return ConvexBody(d, G, b)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_ball_support_and_diameter(d):
    rng = np.random.default_rng(d)
    ball = ConvexBody.ball(d)
    for _ in range(5):
        w = random_unit(d, rng)
        assert support(ball, w) == pytest.approx(1.0, abs=1e-12)
        assert projected_diameter(ball, w) == pytest.approx(2.0, abs=1e-12)


def test_halfspace_binds():
    body = cut(ConvexBody.ball(2), E1, 0.3)
    assert support(body, E1) == pytest.approx(0.3, abs=1e-12)
    assert argmax_point(body, E1)[0] == pytest.approx(0.3)


def test_support_requires_unit_direction():
    with pytest.raises(ValueError):
        support(ConvexBody.ball(2), [2.0, 0.0])


def test_tiny_box_diameter():
    eps = 1e-3
    rng = np.random.default_rng(0)
    for d in (2, 3, 4):
        body = box(rng.uniform(-0.3, 0.3, d), eps)
        for _ in range(10):
            assert projected_diameter(body, random_unit(d, rng)) <= 2 * eps * math.sqrt(d) + 1e-12


def test_batched_widths_match_single_queries():
    rng = np.random.default_rng(1)
    body = random_body(3, rng)
    W = np.array([random_unit(3, rng) for _ in range(20)])
    assert np.allclose(widths(body, W), [projected_diameter(body, w) for w in W], atol=1e-12)


def test_half_disk_centroid():
    body = cut(ConvexBody.ball(2), E1, 0.0, "ge")
    c = centroid_cyl(body, None, np.random.default_rng(0))
    assert np.linalg.norm(c - [4 / (3 * math.pi), 0.0]) <= 0.02


def test_ball_centroid_near_origin():
    for d in (2, 3):
        c = centroid_cyl(ConvexBody.ball(d), None, np.random.default_rng(d))
        assert np.linalg.norm(c) <= 0.02


def test_cylindrified_coordinate_is_interval_midpoint():
    body = cut(cut(ConvexBody.ball(2), E2, 0.305), E2, 0.295, "ge")
    assert projected_diameter(body, E2) == pytest.approx(0.01)
    c = centroid_cyl(body, E2[None, :], np.random.default_rng(0))
    assert c[1] == (support(body, E2) - support(body, -E2)) / 2


def test_redundant_cut_returns_same_body():
    ball = ConvexBody.ball(2)
    assert cut(ball, E1, 1.0) is ball
    assert cut(ball, E1, 1.5) is ball


def test_emptying_cut_is_protocol_violation():
    body = cut(ConvexBody.ball(2), E1, -0.5)
    with pytest.raises(ProtocolViolation):
        cut(body, E1, -0.5, "ge")


def test_feedback_consistent_cuts_keep_s_star():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        d = int(rng.integers(2, 4))
        s_star = random_unit(d, rng) * rng.uniform(0, 0.95)
        body = ConvexBody.ball(d)
        for _ in range(3):
            w = random_unit(d, rng)
            b = float(rng.uniform(-1, 1))
            body = cut(body, w, b, "le" if s_star @ w <= b else "ge")
        assert body.contains(s_star, tol=0.0)


def test_prune_keeps_the_body():
    rng = np.random.default_rng(5)
    body = random_body(2, rng, n_cuts=8)
    G = np.vstack([body.G, body.G])
    b = np.concatenate([body.b, body.b + 0.5])
    fat = ConvexBody(2, G, b)
    slim = prune(fat)
    assert slim.n_constraints <= body.n_constraints
    for _ in range(10):
        w = random_unit(2, rng)
        assert support(slim, w) == pytest.approx(support(body, w), abs=1e-12)


def test_json_round_trip():
    body = random_body(3, np.random.default_rng(2))
    back = ConvexBody.from_json(body.to_json())
    assert np.array_equal(back.G, body.G) and np.array_equal(back.b, body.b)


def test_samples_lie_in_body():
    rng = np.random.default_rng(3)
    body = random_body(3, rng)
    X = sample_projected(body, None, rng, 2000)
    assert body.contains_many(X, 1e-12).all()
    assert body.contains(interior_point(body), tol=0.0)


def test_cylindrification_rejects_far_points():
    body = cut(ConvexBody.ball(2), E1, 0.0)
    assert not in_cylindrification(body, E2[None, :], np.array([[0.5, 0.0]]))[0]
    assert in_cylindrification(body, E2[None, :], np.array([[-0.5, 0.0]]))[0]


def test_fresh_ball_has_no_thin_direction():
    basis = DirectionBasis.empty(2, 1e-6)
    out = update_small_directions(ConvexBody.ball(2), basis, np.random.default_rng(0))
    assert len(out) == 0


def test_slab_thin_direction_is_found():
    delta = 1e-3
    body = cut(cut(ConvexBody.ball(3), E3 := np.array([1.0, 0.0, 0.0]), delta / 4), E3, -delta / 4, "ge")
    out = update_small_directions(body, DirectionBasis.empty(3, delta), np.random.default_rng(0))
    assert len(out) == 1
    assert abs(out.V[0] @ E3) == pytest.approx(1.0, abs=1e-6)


def test_small_direction_threshold():
    assert small_direction_threshold(100, 2) == pytest.approx(1 / (16 * 100**2 * 2 * 9))


def test_centroid_cut_keeps_constant_fraction():
    # Grünbaum: any hyperplane through the centroid leaves >= 1/e of the volume on each side.
    rng = np.random.default_rng(21)
    worst, used = 1.0, 0
    while used < 20:
        body = random_body(2, rng, n_cuts=3)
        grid = GridOracle(body)
        if grid.count < 20_000:  # too few grid cells to measure area fractions
            continue
        used += 1
        c = centroid_cyl(body, None, rng)
        w = random_unit(2, rng)
        left = GridOracle(cut(body, w, float(c @ w))).count / grid.count
        worst = min(worst, left, 1 - left)
    assert worst >= 1 / math.e - 0.03
