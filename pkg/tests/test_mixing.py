import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cumlingam.cumulants import cum_ab
from cumlingam.errors import (DegenerateCumulantError, InputShapeError, NoNullSpaceError,
                              NonEstimableError, SampleSizeError, UnsupportedOrderError)
from cumlingam.independence import test_independence
from cumlingam.mixing import (LatentConfounder, MixingMatrix, ObservedNoise,
                              alpha_from_cumulants, estimate_pair, estimate_pair_general,
                              estimate_with_fallback, null_weight, select_order,
                              surrogate_residual)


def cubed(rng, *shape):
    return rng.standard_normal(shape) ** 3 / np.sqrt(15)


def pair(a_i, a_j, n, seed):
    rng = np.random.default_rng(seed)
    L, S1, S2 = cubed(rng, 3, n)
    x, y = a_i * L + S1, a_j * L + S2
    return x - x.mean(), y - y.mean()


# -- closed forms ------------------------------------------------------------

def test_population_cumulants_give_loadings():
    # alpha_i = 2, alpha_j = 3, kappa4 = 5: C22 = 180, C13 = 270, C11 = 6
    assert alpha_from_cumulants(6.0, 180.0, 270.0) == pytest.approx((2.0, 3.0))


def test_generalized_order_convention():
    # C_{a,b} = alpha_i^a alpha_j^b kappa; the first subscript counts X_i.
    # With alpha_i = 1, alpha_j = 2, kappa5 = 7 and (n, m) = (2, 1):
    # C_{3,1} = 14, C_{2,2} = 28, and C_{n+1,m} / C_{n,m+1} * C11 = alpha_i^2.
    c31, c22, c11 = 1 * 2 * 7.0, 1 * 4 * 7.0, 2.0
    assert alpha_from_cumulants(c11, c31, c22) == pytest.approx((1.0, 2.0))


def test_identical_series_give_unit_loadings():
    L = np.random.default_rng(0).standard_normal(5000) ** 3
    L = (L - L.mean()) / L.std(ddof=1)
    pc = estimate_pair(L, L, degeneracy_multiplier=0)
    assert (pc.alpha_i, pc.alpha_j) == pytest.approx((1.0, 1.0), abs=1e-9)


def test_large_sample_recovery():
    x, y = pair(0.5, 0.7, 1_000_000, seed=3)
    pc = estimate_pair(x, y)
    assert pc.alpha_i == pytest.approx(0.5, abs=0.05)
    assert pc.alpha_j == pytest.approx(0.7, abs=0.05)
    assert pc.order_used == (1, 2)


def test_product_identity_and_sign():
    x, y = pair(0.6, 0.4, 20_000, seed=4)
    pc = estimate_pair(x, y, degeneracy_multiplier=0)
    assert pc.alpha_i * pc.alpha_j == pytest.approx(pc.cum11, rel=1e-12)
    pc2 = estimate_pair(x, -y, degeneracy_multiplier=0)
    assert pc2.alpha_i > 0 and pc2.alpha_j < 0
    assert np.sign(pc2.alpha_i * pc2.alpha_j) == np.sign(pc2.cum11)


def test_general_specializes_to_fourth_order():
    x, y = pair(0.6, 0.5, 20_000, seed=5)
    a = estimate_pair(x, y, degeneracy_multiplier=0)
    b = estimate_pair_general(x, y, 1, 2, degeneracy_multiplier=0)
    assert (a.alpha_i, a.alpha_j) == (b.alpha_i, b.alpha_j)


def test_general_orders_recover_loadings_at_scale():
    # sixth order needs a latent with a large kappa6: uniform^3 style
    # heavy tails are too noisy, so use an exact-scaling check instead
    rng = np.random.default_rng(6)
    L = rng.standard_normal(4000) ** 3
    L = (L - L.mean()) / L.std(ddof=1)
    x, y = 0.5 * L, 0.8 * L
    for n, m in [(1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (1, 4), (2, 3)]:
        pc = estimate_pair_general(x, y, n, m, degeneracy_multiplier=0)
        assert (pc.alpha_i, pc.alpha_j) == pytest.approx((0.5, 0.8), rel=1e-8)


def test_general_rejects_bad_orders():
    x, y = pair(0.5, 0.5, 500, seed=1)
    with pytest.raises(UnsupportedOrderError):
        estimate_pair_general(x, y, 3, 3)
    with pytest.raises(UnsupportedOrderError):
        estimate_pair_general(x, y, 0, 2)


def test_degenerate_and_non_estimable():
    rng = np.random.default_rng(7)
    g = rng.standard_normal((3, 2000))
    with pytest.raises(DegenerateCumulantError):
        estimate_pair(g[0] + g[1], g[0] + g[2], degeneracy_multiplier=3)
    with pytest.raises(SampleSizeError):
        estimate_pair(np.arange(50.0), np.arange(50.0))
    # two shared components with opposite-signed kurtosis: X_i = A + U,
    # X_j = A - 3U gives C22 = k_A + 9 k_U, C13 = k_A + 27 k_U, C11 = -2 with
    # k_A = 43.2 and k_U = -1.2, so the square-root argument is negative
    A = rng.standard_normal(200_000) ** 3 / np.sqrt(15)
    U = rng.uniform(-np.sqrt(3), np.sqrt(3), 200_000)
    with pytest.raises(NonEstimableError):
        estimate_pair(A + U, A - 3 * U, degeneracy_multiplier=0)
    with pytest.raises(NonEstimableError):
        alpha_from_cumulants(6.0, -180.0, 270.0)


def test_select_order_cubed_gaussian_is_fourth_order():
    x, y = pair(0.7, 0.7, 2000, seed=8)
    assert select_order(x, y, degeneracy_multiplier=1.0) == (1, 2)


def _symmetric_zero_kurtosis(n, rng):
    # mixture of a two-point law and a Gaussian tuned so that kappa4 = 0:
    # w * (+-1) + (1 - w) * N(0, s^2) has kappa4 = w + 3(1-w)s^4 - 3(w + (1-w)s^2)^2
    w, s = 0.5, None
    from scipy.optimize import brentq
    k4 = lambda s: w + 3 * (1 - w) * s ** 4 - 3 * (w + (1 - w) * s ** 2) ** 2
    s = brentq(k4, 1.0, 5.0)
    pick = rng.random(n) < w
    out = np.where(pick, rng.choice([-1.0, 1.0], n), rng.normal(0, s, n))
    return out / np.sqrt(w + (1 - w) * s ** 2)


def test_select_order_skips_zero_kurtosis_latent():
    rng = np.random.default_rng(9)
    L = _symmetric_zero_kurtosis(400_000, rng)
    assert abs(cum_ab(L, L, 2, 2).value) < 0.05
    assert abs(cum_ab(L, L, 3, 3).value) > 1.0
    x, y = 0.9 * L, 0.8 * L
    n, m = select_order(x, y, degeneracy_multiplier=3.0)
    assert n + m + 1 == 6


def test_select_order_gaussian_is_non_estimable():
    rng = np.random.default_rng(10)
    L = rng.standard_normal(3000)
    with pytest.raises(NonEstimableError):
        select_order(L + 0.1 * rng.standard_normal(3000), L, degeneracy_multiplier=3.0)


def test_fallback_uses_selected_order():
    rng = np.random.default_rng(9)
    L = _symmetric_zero_kurtosis(400_000, rng)
    pc = estimate_with_fallback(0.9 * L, 0.8 * L, degeneracy_multiplier=3.0)
    assert sum(pc.order_used) + 1 == 6
    # loadings are relative to the sample scale of L
    sd = np.std(L, ddof=1)
    assert (pc.alpha_i, pc.alpha_j) == pytest.approx((0.9 * sd, 0.8 * sd), rel=1e-8)


# -- null space -------------------------------------------------------------

def test_null_weight_examples():
    w = null_weight(np.array([1.0, 2.0]))
    assert w.entries / w.entries[0] == pytest.approx([1.0, -0.5])
    assert np.linalg.norm(w.entries) == pytest.approx(1.0)
    w = null_weight(np.array([0.5, 0.7]), anchor="0")
    assert w.entries == pytest.approx([1.0, -5 / 7])
    assert w.entries[0] == 1.0 and w.normalization_anchor == "0"
    with pytest.raises(NoNullSpaceError):
        null_weight(np.eye(3))


def test_null_weight_anchor_fallback():
    # the null space has no weight on row 0
    A = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 2.0]])
    w = null_weight(A, anchor="0")
    assert w.normalization_anchor is None
    assert np.allclose(w.entries @ A, 0)


@settings(max_examples=100, deadline=None)
@given(rows=st.integers(2, 6), seed=st.integers(0, 10_000), scale=st.floats(0.01, 100))
def test_null_weight_properties(rows, seed, scale):
    rng = np.random.default_rng(seed)
    cols = int(rng.integers(1, rows))
    A = rng.uniform(-1, 1, size=(rows, cols))
    w = null_weight(A, anchor="0")
    assert np.abs(w.entries @ A).max() <= 1e-8 * np.linalg.norm(A)
    assert np.any(w.entries != 0)
    if w.normalization_anchor is not None:
        assert w.entries[0] == 1.0
        # scaling A leaves the anchored weight unchanged
        w2 = null_weight(scale * A, anchor="0")
        assert w2.entries == pytest.approx(w.entries, rel=1e-6, abs=1e-9)


def test_mixing_matrix_labels():
    comps = [LatentConfounder("L1"), ObservedNoise("X1"), ObservedNoise("X2")]
    m = MixingMatrix(["X1", "X2"], comps, [[0.5, 1.0, 0.0], [0.7, 0.3, 1.0]])
    w = null_weight(m.submatrix(["X1", "X2"], [LatentConfounder("L1")]), anchor="X1")
    assert w.labels == ("X1", "X2")
    assert w.as_dict() == pytest.approx({"X1": 1.0, "X2": -5 / 7})
    with pytest.raises(InputShapeError):
        MixingMatrix(["X1"], [ObservedNoise("X1"), ObservedNoise("X1")])
    z = MixingMatrix(["X1", "X2"], comps[:1], [[0.0], [0.0]])
    with pytest.raises(InputShapeError):
        z.check()


# -- surrogate residuals ---------------------------------------------------

def test_perfect_surrogate():
    rng = np.random.default_rng(11)
    L, S = cubed(rng, 2, 1000)
    r = surrogate_residual(L + S, [L], np.array([[1.0], [1.0]]))
    assert np.allclose(r, S)


def test_surrogate_residual_leaves_other_component_loading():
    # X1 = a1 L1 + S1, X2 = a2 L1 + g L2 + S2: removing L1 from X2 through X1
    # keeps the L2 loading and picks up -(a2/a1) on S1
    rng = np.random.default_rng(12)
    L1, L2, S1, S2 = cubed(rng, 4, 5000)
    a1, a2, g = 0.6, 0.8, 0.5
    X1, X2 = a1 * L1 + S1, a2 * L1 + g * L2 + S2
    r = surrogate_residual(X2, [X1], np.array([[a2], [a1]]))
    assert np.allclose(r, g * L2 + S2 - a2 / a1 * S1)


def test_surrogate_residual_independent_of_cancelled_component():
    passes = 0
    for seed in range(50):
        rng = np.random.default_rng(100 + seed)
        L, S1, S2 = cubed(rng, 3, 600)
        X1, X2 = 0.5 * L + S1, 0.7 * L + S2
        r = surrogate_residual(X2, [X1], np.array([[0.7], [0.5]]))
        # the residual is S2 - 1.4 S1, free of L
        passes += test_independence(r, L, seed=seed).independent
    assert passes >= 45


def test_surrogate_residual_errors():
    x = np.ones(10)
    with pytest.raises(NoNullSpaceError):
        surrogate_residual(x, [], np.array([[1.0]]))
    with pytest.raises(InputShapeError):
        surrogate_residual(x, [x, x], np.array([[1.0], [1.0]]))
