import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlx.errors import InputError, SizeError
from tlx.penalty import trimmed_l1_value
from tlx.prox import SeparableAddon, prox_bruteforce, prox_point, prox_trimmed_l1, prox_truncated_nuclear

ADDON_KINDS = ("none", "l1", "box", "nonneg")


def random_addon(rng, kind, size, p):
    if kind == "l1":
        return SeparableAddon.l1(rng.uniform(0, 1))
    if kind == "box":
        lo = rng.uniform(-2, 0.5, size)
        return SeparableAddon.box(lo, lo + rng.uniform(0, 3, size))
    if kind == "nonneg":
        return SeparableAddon.nonneg(rng.random(size) < 0.7 if p == 1 else None)
    return SeparableAddon.none()


@pytest.mark.parametrize(
    "x, K, gamma, point, untrimmed",
    [
        ([3.0, 1.0], 1, 0.5, [3.0, 0.5], (0,)),
        ([3.0, -1.0], 0, 1.0, [2.0, 0.0], ()),
        ([1.0, 1.0], 1, 1.0, [1.0, 0.0], (0,)),
    ],
)
def test_trimmed_prox_examples(x, K, gamma, point, untrimmed):
    res = prox_trimmed_l1(x, K, gamma)
    np.testing.assert_array_equal(res.point, point)
    assert res.untrimmed == untrimmed


@pytest.mark.parametrize(
    "diag, K, gamma, expected",
    [([3.0, 1.0], 1, 0.5, [3.0, 0.5]), ([3.0, 1.0], 0, 1.0, [2.0, 0.0]), ([3.0, 1.0], 1, 2.0, [3.0, 0.0])],
)
def test_truncated_prox_examples(diag, K, gamma, expected):
    res = prox_truncated_nuclear(np.diag(diag), K, gamma)
    np.testing.assert_allclose(res.point, np.diag(expected), atol=1e-14)


def test_bruteforce_matches_savings_rule_on_small_case():
    assert prox_bruteforce([3.0, 1.0], 1, 0.5).objective == pytest.approx(prox_trimmed_l1([3.0, 1.0], 1, 0.5).objective,
                                                                          abs=1e-15)


@pytest.mark.parametrize("K", [0, 1, 2])
def test_bruteforce_at_origin(K):
    res = prox_bruteforce(np.zeros(3), K, 2.0)
    np.testing.assert_array_equal(res.point, np.zeros(3))
    assert res.objective == 0.0


def test_bruteforce_nonneg_leaves_one_group_free():
    # K = 1 leaves the entry 2 unpenalized; the nonneg projection zeroes -3
    res = prox_bruteforce([2.0, -3.0], 1, 10.0, SeparableAddon.nonneg())
    np.testing.assert_array_equal(res.point, [2.0, 0.0])
    assert res.objective == pytest.approx(4.5)
    assert prox_trimmed_l1([2.0, -3.0], 1, 10.0, SeparableAddon.nonneg()).objective == pytest.approx(4.5)


def test_bruteforce_size_cap():
    with pytest.raises(SizeError) as info:
        prox_bruteforce(np.ones(20), 10, 1.0, cap=1000)
    assert info.value.count == 184756


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_nonpositive_gamma_rejected(gamma):
    with pytest.raises(InputError):
        prox_trimmed_l1([1.0, 2.0], 0, gamma)
    with pytest.raises(InputError):
        prox_truncated_nuclear(np.eye(2), 0, gamma)


def test_box_addon_needs_scalar_groups():
    with pytest.raises(InputError):
        prox_trimmed_l1(np.ones(4), 1, 1.0, SeparableAddon.box(-1, 1), p=2)


def test_box_excluding_zero():
    # [1, 2] does not contain 0: the penalized candidate clamps to the bound
    res = prox_trimmed_l1([0.5, 3.0], 0, 1.0, SeparableAddon.box(1.0, 2.0))
    np.testing.assert_array_equal(res.point, [1.0, 2.0])
    assert res.objective == pytest.approx(prox_bruteforce([0.5, 3.0], 0, 1.0, SeparableAddon.box(1.0, 2.0)).objective)


def test_writes_literal_zeros():
    res = prox_trimmed_l1([0.3, -0.2, 5.0, 0.1], 1, 1.0)
    assert np.count_nonzero(res.point) == 1


def test_fast_path_matches_checked_prox():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(12)
    addon = SeparableAddon.l1(0.2)
    np.testing.assert_array_equal(prox_point(x, 2, 0.7, addon, 2), prox_trimmed_l1(x, 2, 0.7, addon, 2).point)


# -- properties --------------------------------------------------------------------


@pytest.mark.parametrize("kind", ADDON_KINDS)
@pytest.mark.parametrize("p", [1, 2])
def test_oracle_equivalence(kind, p):
    if kind == "box" and p == 2:
        pytest.skip("box add-on is scalar only")
    rng = np.random.default_rng(10 * ADDON_KINDS.index(kind) + p)
    for _ in range(200):
        m = int(rng.integers(1, 9))
        K = int(rng.integers(0, m))
        x = rng.normal(0, 2, m * p)
        gamma = rng.uniform(0.05, 3)
        addon = random_addon(rng, kind, m * p, p)
        fast = prox_trimmed_l1(x, K, gamma, addon, p)
        slow = prox_bruteforce(x, K, gamma, addon, p)
        assert abs(fast.objective - slow.objective) <= 1e-12 * max(1.0, abs(slow.objective))


@given(st.integers(1, 6), st.sampled_from([1, 2]), st.integers(0, 2**31))
def test_fixed_point_when_feasible_and_large(m, p, seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(0, m))
    gamma = rng.uniform(0.1, 2)
    zg = np.zeros((m, p))
    keep = rng.choice(m, size=K, replace=False)
    for i in keep:
        v = rng.standard_normal(p)
        zg[i] = v / np.linalg.norm(v) * (gamma + rng.uniform(0.01, 3))
    z = zg.ravel()
    np.testing.assert_array_equal(prox_trimmed_l1(z, K, gamma, p=p).point, z)


@given(st.lists(st.floats(0, 10), min_size=2, max_size=6), st.floats(0.01, 5), st.data())
def test_spectral_reduction(diag, gamma, data):
    d = np.sort(np.array(diag))[::-1]
    K = data.draw(st.integers(0, d.size - 1))
    mat = prox_truncated_nuclear(np.diag(d), K, gamma)
    vec = prox_trimmed_l1(d, K, gamma)
    assert mat.objective == pytest.approx(vec.objective, abs=1e-12 * (1 + d.max()) ** 2)
    if np.all(np.diff(d) < 0):
        # with repeated singular values the SVD order (hence the kept copy) is arbitrary
        np.testing.assert_allclose(mat.point, np.diag(vec.point), atol=1e-12 * (1 + d.max()))


@settings(max_examples=50)
@given(st.integers(2, 7), st.integers(0, 2**31))
def test_idempotent_when_penalty_vanishes(m, seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(0, m))
    gamma = rng.uniform(0.1, 2)
    first = prox_trimmed_l1(rng.normal(0, 3, m), K, gamma)
    if trimmed_l1_value(first.point, K) != 0.0:
        return
    again = prox_trimmed_l1(first.point, K, gamma)
    # z itself attains objective 0, and every objective is nonnegative
    assert again.objective == pytest.approx(0.0, abs=1e-15)
