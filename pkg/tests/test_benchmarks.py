"""Benchmark construction: tabular families, fixed networks, counterexamples."""

import numpy as np
import pytest

import pbopt
from pbopt.benchmarks import (
    GenLossSpec,
    MaskedRegressionSpec,
    genloss_table,
    make_checkerboard,
    make_counterexample,
    make_exponential_tabular,
    make_genloss,
    make_masked_regression,
    make_nnloss,
    tabular_from_draws,
)
from pbopt.pbcore import CapacityError, all_vertices, exact_expectation, exact_gradient, hamming


def test_exponential_tabular_range_and_monotonicity():
    rng = np.random.default_rng(0)
    draws = rng.exponential(scale=1 / 1.5, size=1 << 6)
    f = tabular_from_draws(draws, 6)
    assert f.table.min() == -1.0
    assert f.table.max() == 1.0
    # larger draw -> strictly smaller cost (full rank reversal)
    order_draws = np.argsort(draws)
    assert np.all(np.diff(f.table[order_draws]) <= 0)


def test_exponential_tabular_rate_invariance():
    # the affine normalization cancels the exponential scale entirely
    rng1 = np.random.default_rng(5)
    rng2 = np.random.default_rng(5)
    f1 = make_exponential_tabular(5, rate=1.5, rng=rng1)
    f2 = make_exponential_tabular(5, rate=3.0, rng=rng2)
    assert f1.table == pytest.approx(f2.table, abs=1e-12)


def test_exponential_tabular_degenerate_draws():
    f = tabular_from_draws(np.full(8, 0.7), 3)
    assert np.all(f.table == 0.0)


def test_exponential_tabular_capacity():
    with pytest.raises(CapacityError):
        make_exponential_tabular(17, rng=np.random.default_rng(0))


def test_checkerboard_layout():
    f = make_checkerboard(1.0, 3.0)
    assert f.table.tolist() == [3.0, 1.0, 1.0, 3.0]
    assert exact_gradient(f, [0.5, 0.5]).tolist() == [0.0, 0.0]
    assert exact_expectation(f, [0.5, 0.5]) == pytest.approx(2.0)
    assert f.table.min() == 1.0
    with pytest.raises(ValueError):
        make_checkerboard(3.0, 1.0)


def test_genloss_shell_values():
    m, m0, dm = -2.0, 1.0, 1.0
    f = genloss_table(np.ones(3), m, m0, dm)
    assert f.eval_discrete([0, 0, 0]) == pytest.approx(m0 - dm)
    assert f.eval_discrete([0, 1, 1]) == pytest.approx(m0 - dm / 3)
    assert f.eval_discrete([0, 0, 1]) == pytest.approx(m0 - 2 * dm / 3)
    assert f.eval_discrete([1, 1, 1]) == pytest.approx(m)


def test_genloss_uniqueness_validation():
    with pytest.raises(ValueError):
        make_genloss(GenLossSpec(zstar=np.ones(3), m=0.5, m0=1.0, dm=1.0))
    f = make_genloss(GenLossSpec(zstar=np.ones(3), m=-2.0, m0=1.0, dm=1.0))
    assert f.eval_discrete([1, 1, 1]) == -2.0


def test_genloss_sign_condition_thm_threshold():
    # inner-product sign flips exactly at m = m0 - dm/(d prod_{j!=i} p_j)
    d = 3
    theta = np.full(d, 0.9)
    m0, dm = 1.0, 1.0
    threshold = m0 - dm / (d * 0.9 ** (d - 1))
    for offset, expect_nonneg in ((-0.01 * dm, True), (0.01 * dm, False)):
        f = genloss_table(np.ones(d), threshold + offset, m0, dm)
        grad = exact_gradient(f, theta)
        grad_pstar = np.array([np.prod(np.delete(theta, i)) for i in range(d)])
        inner = -grad * grad_pstar
        assert np.all(inner >= 0) == expect_nonneg


def test_corollary_threshold_requirement_is_exponential_in_d():
    # the admissible m must fall at an exponential rate once d passes the
    # turning point -1/log(1-eps); with eps = 0.1 that is d ~ 9.5
    eps = 0.1
    thresholds = np.array([1.0 - 1.0 / (d * (1 - eps) ** (d - 1)) for d in range(2, 81)])
    turning = int(np.ceil(-1.0 / np.log(1 - eps)))
    tail = thresholds[turning - 2 :]
    assert np.all(np.diff(tail) < 0)
    assert thresholds[-1] < -10.0  # unbounded below, faster than any polynomial
    ratios = np.diff(-tail)  # growth of the required gap
    assert ratios[-1] > 2 * ratios[len(ratios) // 2]


def test_nnloss_determinism_and_vertex_consistency():
    f1 = make_nnloss(6, np.random.default_rng(3))
    f2 = make_nnloss(6, np.random.default_rng(3))
    assert np.array_equal(f1.tabulate().table, f2.tabulate().table)
    z = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    assert f1.eval_discrete(z) == f1.eval_discrete(z)
    assert f1.eval_smooth(z) == f1.eval_discrete(z)


def test_nnloss_gradient_matches_finite_differences():
    f = make_nnloss(8, np.random.default_rng(4))
    rng = np.random.default_rng(5)
    h = 1e-5
    for _ in range(20):
        u = rng.uniform(0.1, 0.9, size=8)
        g = f.grad_smooth(u)
        for i in range(8):
            up, dn = u.copy(), u.copy()
            up[i] += h
            dn[i] -= h
            fd = (f.eval_smooth(up) - f.eval_smooth(dn)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_nnloss_architecture():
    f = make_nnloss(5, np.random.default_rng(6))
    widths = [5] + [20] * 9 + [1]
    assert f.mlp.widths == widths
    assert all(np.isin(w, (-1.0, 1.0)).all() for w in f.mlp.weights)


def test_counterexample_ex31_shape():
    f = make_counterexample("ex31")
    assert f.eval_discrete([0]) < f.eval_discrete([1])
    assert f.grad_smooth([0.5])[0] < 0  # descending toward z=1 in the bulk
    assert f.grad_smooth([0.127])[0] > 0  # steep push toward z=0 in the slivers
    assert f.grad_smooth([0.872])[0] > 0
    # smooth value is the integral of the slope field
    grid = np.linspace(0, 1, 2001)
    vals = np.array([f.eval_smooth([u]) for u in grid])
    slopes = np.diff(vals) / np.diff(grid)
    exact_slopes = np.array([f.grad_smooth([u])[0] for u in (grid[:-1] + grid[1:]) / 2])
    assert slopes == pytest.approx(exact_slopes, abs=1e-6)


def test_counterexample_ex32_shape():
    f = make_counterexample("ex32")
    assert f.eval_discrete([0]) < f.eval_discrete([1])
    assert f.grad_smooth([0.7])[0] < 0
    for u in np.linspace(0.401, 1.0, 50):
        assert f.grad_smooth([u])[0] < 0
    for u in np.linspace(0.0, 0.399, 50):
        assert f.grad_smooth([u])[0] > 0
    with pytest.raises(ValueError):
        make_counterexample("ex33")


def test_masked_regression_identity_and_zero_masks():
    spec = MaskedRegressionSpec(backbone_hidden=(6, 6), target_hidden=(20, 20),
                                train_size=150, val_size=60, batch_size=30)
    f = make_masked_regression(spec, np.random.default_rng(7))
    ones = np.ones(f.d)
    # identity mask equals the unmasked backbone on the same batch
    x = f.train_x[f._batch_idx]
    y = f.train_y[f._batch_idx]
    unmasked = float(np.mean(np.abs(f.backbone.forward(x)[:, 0] - y)))
    assert f.eval_smooth(ones) == pytest.approx(unmasked, abs=1e-12)

    zeros = np.zeros(f.d)
    v1 = f.eval_discrete(zeros)
    v2 = f.eval_discrete(zeros)
    assert np.isfinite(v1) and v1 == v2


def test_masked_regression_gradient_matches_finite_differences():
    spec = MaskedRegressionSpec(backbone_hidden=(8, 8), target_hidden=(25, 25),
                                train_size=200, val_size=80, batch_size=40)
    f = make_masked_regression(spec, np.random.default_rng(8))
    rng = np.random.default_rng(9)
    mask = rng.uniform(0.3, 1.0, size=f.d)
    g = f.grad_smooth(mask)
    h = 1e-6
    for i in rng.choice(f.d, size=10, replace=False):
        up, dn = mask.copy(), mask.copy()
        up[i] += h
        dn[i] -= h
        fd = (f.eval_smooth(up) - f.eval_smooth(dn)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-3, abs=1e-10)


def test_masked_regression_dimension_counts_weights():
    spec = MaskedRegressionSpec(backbone_hidden=(20, 20, 20, 20))
    f = make_masked_regression(
        MaskedRegressionSpec(backbone_hidden=(20, 20, 20, 20), target_hidden=(30,),
                             train_size=100, val_size=50, batch_size=20),
        np.random.default_rng(10),
    )
    assert f.d == 10 * 20 + 20 * 20 * 3 + 20 * 1  # 1420, no biases anywhere


def test_masked_regression_small_instance_determinism():
    spec = MaskedRegressionSpec(backbone_hidden=(), target_hidden=(10,),
                                train_size=80, val_size=40, batch_size=20)
    f1 = make_masked_regression(spec, np.random.default_rng(11))
    f2 = make_masked_regression(spec, np.random.default_rng(11))
    assert f1.d == 10
    verts = all_vertices(10)[:64]
    t1 = np.array([f1.eval_discrete(v) for v in verts])
    t2 = np.array([f2.eval_discrete(v) for v in verts])
    assert np.array_equal(t1, t2)


def test_masked_regression_targets_normalized():
    spec = MaskedRegressionSpec(backbone_hidden=(6,), target_hidden=(15,),
                                train_size=120, val_size=60, batch_size=30)
    f = make_masked_regression(spec, np.random.default_rng(12))
    assert f.train_y.min() == pytest.approx(0.0)
    assert f.train_y.max() == pytest.approx(1.0)


def test_genloss_hamming_structure_matches_formula():
    rng = np.random.default_rng(13)
    zstar = (rng.random(4) < 0.5).astype(float)
    f = genloss_table(zstar, -3.0, 0.5, 2.0)
    for h in range(16):
        z = all_vertices(4)[h]
        if np.array_equal(z, zstar):
            assert f.table[h] == -3.0
        else:
            assert f.table[h] == pytest.approx(0.5 - hamming(z, zstar) * 2.0 / 4)
