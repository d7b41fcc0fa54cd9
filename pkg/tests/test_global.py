import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ifit import kernels
from ifit.core import Bounds, Config, DegenerateStatisticError, SimArchive
from ifit.engine import Engine
from ifit.global_search import (
    GlobalState,
    bridge_knn,
    bridge_knn_all,
    elite_size,
    global_converged,
    global_iterate,
    init_global,
    neighborhood_size,
    rank_points,
    run_global,
)
from ifit.mathkit import mahalanobis_sq
from ifit.models import make_dataset
from ifit.sampling import DATASET, RngStream

from toys import ConstantToy, QuadraticToy


def tricube(u):
    return (1 - u ** 3) ** 3


def test_elite_sizes():
    cfg = Config()
    assert elite_size(1000, cfg) == 550
    assert elite_size(2000, cfg) == 157
    assert elite_size(10**6, cfg) == 100


@given(st.integers(1000, 50_000), st.integers(1, 5000))
def test_elite_size_nonincreasing(n, extra):
    cfg = Config()
    assert cfg.n_elite <= elite_size(n + extra, cfg) <= elite_size(n, cfg) <= cfg.n_init


def test_neighborhood_size_is_ceil_sqrt():
    for n in range(1, 3000):
        assert neighborhood_size(n) == math.ceil(math.sqrt(n))


def test_bridge_constant_statistics(rng):
    th = rng.random((50, 2))
    t = np.tile([1.5, -2.0, 3.0], (50, 1))
    np.testing.assert_allclose(bridge_knn_all(th, t, np.ones(2)), t)


def test_bridge_hand_oracle_n4():
    th = np.array([[0.0], [0.5], [2.0], [3.0]])
    t = np.array([[1.0], [2.0], [3.0], [4.0]])
    # k = 2: each point's farthest neighbour sits on the boundary and gets weight 0
    np.testing.assert_allclose(bridge_knn_all(th, t, np.ones(1)), t)


def test_bridge_hand_oracle_n9():
    th = np.array([0.0, 1.0, 3.0, 6.0, 10.0, 15.0, 21.0, 28.0, 36.0])[:, None]
    t = th ** 2
    out = bridge_knn_all(th, t, np.ones(1))[:, 0]
    # k = 3. Point 0: neighbours at 0, 1, 3 -> dbar = 3
    w1 = tricube(1 / 3)
    assert out[0] == pytest.approx((0.0 + w1 * 1.0) / (1 + w1), rel=1e-14)
    # point 2 (theta 3): distances 2 (theta 1) and a tie at 3 -> dbar = 3
    w = tricube(2 / 3)
    assert out[2] == pytest.approx((9.0 + w * 1.0) / (1 + w), rel=1e-14)
    # point 8 (theta 36): neighbours 28 (8) and 21 (15) -> dbar = 15
    w = tricube(8 / 15)
    assert out[8] == pytest.approx((36.0 ** 2 + w * 28.0 ** 2) / (1 + w), rel=1e-14)


def test_bridge_uses_range_scaling():
    th = np.array([[0.0, 0.0], [10.0, 0.1], [0.0, 0.2], [20.0, 0.3]])
    t = np.arange(4.0)[:, None]
    d0 = np.array([100.0, 0.01])
    scaled = th / np.sqrt(d0)
    np.testing.assert_allclose(bridge_knn_all(th, t, d0), bridge_knn_all(scaled, t, np.ones(2)))


def test_bridge_coincident_points_plain_average():
    th = np.zeros((9, 1))
    t = np.arange(9.0)[:, None]
    # dbar = 0: average of the first k = 3 points by index
    np.testing.assert_allclose(bridge_knn_all(th, t, np.ones(1)), 1.0)


def test_single_point_bridge_matches_batch(rng):
    th = rng.random((200, 3))
    t = rng.standard_normal((200, 3))
    arc = SimArchive(np.zeros(3), 3)
    arc.extend(th, t)
    d0 = np.array([1.0, 4.0, 0.25])
    allb = bridge_knn_all(th, t, d0)
    for i in (0, 17, 199):
        np.testing.assert_allclose(bridge_knn(arc, d0, i), allb[i], rtol=1e-12)


def test_bridge_self_weight_dominates(rng):
    th = rng.random((100, 2))
    t = rng.standard_normal((100, 1))
    k = neighborhood_size(100)
    out = bridge_knn_all(th, t, np.ones(2))
    for i in range(5):
        d = np.sqrt(np.sum((th - th[i]) ** 2, axis=1))
        order = np.argsort(d, kind="stable")[:k]
        dbar = d[order[-1]]
        w = tricube(d[order] / dbar)
        assert w[0] == 1.0
        assert out[i, 0] == pytest.approx(w @ t[order, 0] / w.sum(), rel=1e-12)


def _state_with_elite(elite):
    elite = np.asarray(elite, dtype=float)
    arc = SimArchive(np.zeros(elite.shape[1]), elite.shape[1])
    arc.extend(elite, np.zeros_like(elite))
    b = Bounds([-1e3] * elite.shape[1], [1e3] * elite.shape[1])
    st_ = GlobalState(archive=arc, bounds=b, d0=b.width ** 2)
    st_.elite_idx = np.arange(elite.shape[0])
    return st_


def test_global_converged_examples():
    cfg = Config()
    assert global_converged(_state_with_elite(np.full((10, 2), 0.3)), cfg)
    x = np.array([-0.5, 0.5])[:, None] / np.std([-0.5, 0.5], ddof=1) * 0.5  # sd 0.5, mean 0
    assert not global_converged(_state_with_elite(x), cfg)
    y = 100 + np.array([-5.0, 5.0])[:, None] / np.std([-5.0, 5.0], ddof=1) * 5.0 * 0.999
    assert global_converged(_state_with_elite(y), cfg)


def _logit_engine(seed=11):
    root = RngStream(seed)
    model, t_obs = make_dataset("logit", root.generator(DATASET, 0))
    return Engine(model, t_obs, root.child(0, 0))


def test_global_iteration_invariants():
    cfg = Config()
    eng = _logit_engine()
    state = init_global(eng, cfg)
    assert len(eng.archive) == cfg.n_init
    for _ in range(4):
        before = len(eng.archive)
        snapshot = eng.archive.thetas.copy()
        done = global_iterate(state, eng, cfg)
        d = state.distances
        np.testing.assert_array_equal(np.sort(d)[:state.elite_size], d[state.elite_idx])
        assert state.elite_size == min(elite_size(before, cfg), before)
        assert len(set(state.elite_idx.tolist())) == state.elite_size
        if done:
            break
        assert len(eng.archive) == before + cfg.nadd_global
        np.testing.assert_array_equal(eng.archive.thetas[:before], snapshot)
        new = eng.archive.thetas[before:]
        assert np.all(new >= eng.bounds.lower) and np.all(new <= eng.bounds.upper)


def test_rank_points_distances_are_mahalanobis():
    cfg = Config()
    eng = _logit_engine(3)
    state = init_global(eng, cfg)
    rank_points(state, cfg)
    resid = eng.archive.observed - state.bridge
    i = int(state.elite_idx[0])
    assert state.distances[i] == pytest.approx(mahalanobis_sq(resid[i], state.sigma.sigma), rel=1e-12)


def test_run_global_logit_postconditions():
    cfg = Config()
    eng = _logit_engine()
    state = run_global(eng, cfg)
    n = len(eng.archive)
    assert cfg.n_init <= n <= cfg.n_init + cfg.max_global_iters * cfg.nadd_global
    assert (n - cfg.n_init) % cfg.nadd_global == 0
    elite = state.elite
    sd = elite.std(axis=0, ddof=1)
    assert np.all(sd < np.maximum(1, np.abs(elite.mean(axis=0))) * cfg.tol_global)


def test_constant_statistic_reports_index():
    sim = ConstantToy()
    eng = Engine(sim, np.array([1.0, 0.5, 2.0]), RngStream(0))
    with pytest.raises(DegenerateStatisticError) as info:
        run_global(eng, Config(n_init=200, n_elite=20, nfit_local=200))
    assert info.value.index == 0


def test_quadratic_toy_one_branch():
    sim = QuadraticToy(bounds=Bounds([0.0], [1.0]))
    eng = Engine(sim, np.array([0.25]), RngStream(5))
    state = run_global(eng, Config(n_init=400, n_elite=40, nfit_local=400))
    assert abs(state.elite.mean() - 0.5) < 0.2


def test_quadratic_toy_elite_sits_on_both_roots():
    # with both roots inside the box the elite splits between them
    cfg = Config(n_init=400, n_elite=40, nfit_local=400)
    eng = Engine(QuadraticToy(), np.array([0.25]), RngStream(5))
    state = init_global(eng, cfg)
    for _ in range(20):
        global_iterate(state, eng, cfg)
    assert abs(np.abs(state.elite).mean() - 0.5) < 0.2


def test_bridge_kernel_backends_agree(rng):
    from ifit import _fallback
    th = rng.random((300, 3))
    th[::7] = th[0]  # exact duplicates exercise ties
    t = rng.standard_normal((300, 4))
    k = neighborhood_size(300)
    np.testing.assert_allclose(kernels.knn_tricube(th, t, k), _fallback.knn_tricube(th, t, k), rtol=1e-12)
