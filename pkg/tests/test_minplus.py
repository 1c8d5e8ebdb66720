"""Min-plus core: every operator against a brute-force candidate oracle."""

import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from drrcalc.minplus import (
    CurveError, HorizonError, PwFunction, PLUS_INFINITY, compose, horizontal_deviation,
    lower_pseudo_inverse, max_plus_convolution, min_plus_convolution,
    min_plus_deconvolution, nondecreasing_closure, positive_nondecreasing_closure,
    sufficient_horizon, super_additive_closure, upper_pseudo_inverse,
)

from oracles import closure_at, conv_at, deconv_at, one_sided, probe_points, random_function

SEEDS = range(40)


def _probes(rng, f, *others):
    extra = set(f.breakpoints)
    for g in others:
        extra |= set(g.breakpoints)
    return probe_points(rng, f.horizon, extra)


# --- construction and evaluation -------------------------------------------

def test_token_bucket_values():
    f = PwFunction.token_bucket(2, 3, 10)
    assert f(0) == 0
    assert f.right_limit(0) == 3
    assert f(F(1, 2)) == 4


def test_stair_is_left_continuous():
    f = PwFunction.stair(2, 3, 9)
    assert f(3) == 2
    assert f.right_limit(3) == 4
    assert f(F(1, 10)) == 2


def test_canonical_form_merges_redundant_breakpoints():
    f = PwFunction([0, 1, 2], [0, 1, 2], [0, 1], [1, 1])
    assert f.breakpoints == (0, 2)
    assert f == PwFunction.identity(2)


def test_bad_breakpoints_rejected():
    with pytest.raises(CurveError):
        PwFunction([0, 0, 1], [0, 0, 0], [0, 0], [0, 0])
    with pytest.raises(CurveError):
        PwFunction([1, 2], [0, 0], [0], [0])


def test_horizon_error_beyond_horizon():
    f = PwFunction.identity(2)
    with pytest.raises(HorizonError):
        f(3)
    g = f.with_tail(PLUS_INFINITY)
    assert g(3) == float("inf")


def test_segments_round_trip():
    rng = random.Random(5)
    for _ in range(20):
        f = random_function(rng)
        g = PwFunction.from_segments(f.segments, f.horizon)
        assert g == f


# --- pointwise operations ----------------------------------------------------

@pytest.mark.parametrize("seed", SEEDS)
def test_pointwise_min_max_add(seed):
    rng = random.Random(seed)
    f = random_function(rng)
    g = random_function(rng)
    lo, hi, sm = f.minimum(g), f.maximum(g), f + g
    for t in _probes(rng, f, g):
        assert lo(t) == min(f(t), g(t))
        assert hi(t) == max(f(t), g(t))
        assert sm(t) == f(t) + g(t)
    for t in _probes(rng, f, g)[1:]:
        assert lo.left_limit(t) == min(f.left_limit(t), g.left_limit(t))


def test_horizon_mismatch():
    with pytest.raises(HorizonError):
        PwFunction.identity(1) + PwFunction.identity(2)


# --- convolutions ------------------------------------------------------------

@pytest.mark.parametrize("seed", SEEDS)
def test_min_plus_convolution_matches_oracle(seed):
    rng = random.Random(seed)
    f = random_function(rng, increasing=rng.random() < 0.5)
    g = random_function(rng, increasing=rng.random() < 0.5)
    h = min_plus_convolution(f, g)
    for t in _probes(rng, f, g):
        assert h(t) == conv_at(f, g, t, min), t


@pytest.mark.parametrize("seed", SEEDS)
def test_max_plus_convolution_matches_oracle(seed):
    rng = random.Random(1000 + seed)
    f = random_function(rng)
    g = random_function(rng)
    h = max_plus_convolution(f, g)
    for t in _probes(rng, f, g):
        assert h(t) == conv_at(f, g, t, max), t


def test_convolution_token_bucket_rate_latency():
    f = PwFunction.token_bucket(2, 3, 10)
    g = PwFunction.rate_latency(5, 1, 10)
    h = min_plus_convolution(f, g)
    assert h(2) == 5
    assert h(10) == 21


def test_convolution_of_smoothing_and_stair():
    # min(t, stair) smoothing used for the DRR service pattern
    h = min_plus_convolution(PwFunction.identity(6), PwFunction.stair(1, 2, 6))
    for t, v in [(0, 0), (1, 1), (2, 1), (3, 2), (4, 2), (F(9, 2), F(5, 2))]:
        assert h(t) == v


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_convolution_commutes(seed):
    rng = random.Random(seed)
    f = random_function(rng, increasing=True)
    g = random_function(rng, increasing=True)
    assert min_plus_convolution(f, g) == min_plus_convolution(g, f)


def test_convolution_identity_element():
    rng = random.Random(3)
    f = random_function(rng, increasing=True)
    # the impulse at 0 is approximated by a value far above f after 0
    big = PwFunction([0, f.horizon], [0, 10 ** 6], [10 ** 6], [0])
    assert min_plus_convolution(f, big) == f


# --- deconvolution -----------------------------------------------------------

@pytest.mark.parametrize("seed", SEEDS)
def test_deconvolution_matches_oracle(seed):
    rng = random.Random(2000 + seed)
    f = random_function(rng, horizon=12, increasing=rng.random() < 0.7)
    s_max = F(rng.randint(1, 6))
    g = random_function(rng, horizon=s_max, increasing=rng.random() < 0.7)
    out_h = 12 - s_max
    h = min_plus_deconvolution(f, g, horizon=out_h, s_max=s_max)
    for t in probe_points(rng, out_h, set(f.breakpoints) | {b for b in f.breakpoints}):
        assert h(t) == deconv_at(f, g, t, s_max), t


def test_deconvolution_by_impulse_is_identity():
    f = PwFunction.token_bucket(2, 3, 6)
    impulse = PwFunction.zero(0).with_tail(PLUS_INFINITY)
    assert min_plus_deconvolution(f, impulse, horizon=6, s_max=5) == f


def test_deconvolution_token_bucket_by_rate_latency():
    f = PwFunction.token_bucket(2, 3, 20)
    g = PwFunction.rate_latency(5, 1, 10)
    h = min_plus_deconvolution(f, g, horizon=10, s_max=10)
    assert h == PwFunction.affine(2, 5, 10)


def test_deconvolution_needs_horizon():
    f = PwFunction.token_bucket(2, 3, 5)
    g = PwFunction.rate_latency(5, 1, 4)
    with pytest.raises(HorizonError):
        min_plus_deconvolution(f, g, horizon=3, s_max=4)


# --- closures and inverses ---------------------------------------------------

@pytest.mark.parametrize("seed", SEEDS)
def test_nondecreasing_closure_matches_oracle(seed):
    rng = random.Random(3000 + seed)
    f = random_function(rng)
    c = nondecreasing_closure(f)
    p = positive_nondecreasing_closure(f)
    assert c.is_nondecreasing()
    for t in _probes(rng, f):
        assert c(t) == closure_at(f, t)
        assert p(t) == max(closure_at(f, t), 0)


@pytest.mark.parametrize("seed", SEEDS)
def test_lower_pseudo_inverse_galois(seed):
    rng = random.Random(4000 + seed)
    f = random_function(rng, increasing=True)
    inv = lower_pseudo_inverse(f)
    assert inv.horizon == f(f.horizon)
    xs = _probes(rng, f)
    for y in probe_points(rng, inv.horizon, set(f.values_and_limits())):
        x_star = inv(y)
        # inf{x : f(x) >= y}: everything left of it is below y, and it is approached
        for x in xs:
            if f(x) >= y:
                assert x_star <= x
            if x < x_star:
                assert f(x) < y
        # the infimum is attained or approached from the right
        near = [f(x_star)] + ([f.right_limit(x_star)] if x_star < f.horizon else [])
        assert max(near) >= y


@pytest.mark.parametrize("seed", SEEDS)
def test_upper_pseudo_inverse_galois(seed):
    rng = random.Random(5000 + seed)
    f = random_function(rng, increasing=True)
    inv = upper_pseudo_inverse(f)
    end = f(f.horizon)
    xs = _probes(rng, f)
    for y in probe_points(rng, inv.horizon, set(f.values_and_limits())):
        if y == end:
            continue
        x_star = inv(y)
        for x in xs:
            if f(x) <= y:
                assert x <= x_star
            if x > x_star:
                assert f(x) > y
        if x_star > 0:
            assert min([f(x_star), f.left_limit(x_star)]) <= y


def test_pseudo_inverse_of_rate_latency():
    beta = PwFunction.rate_latency(4, 2, 10)
    inv = lower_pseudo_inverse(beta)
    assert inv(0) == 0
    assert inv(F(1, 100)) == 2 + F(1, 400)
    assert inv(32) == 10
    # plateau of the inverse at 0 becomes a jump
    assert inv.right_limit(0) == 2


def test_pseudo_inverse_requires_monotone():
    with pytest.raises(CurveError):
        lower_pseudo_inverse(-PwFunction.identity(3))


@pytest.mark.parametrize("seed", SEEDS)
def test_composition_matches_pointwise(seed):
    rng = random.Random(6000 + seed)
    inner = random_function(rng, increasing=True)
    outer = random_function(rng, horizon=inner(inner.horizon) + 1)
    c = compose(outer, inner)
    for t in _probes(rng, inner):
        assert c(t) == outer(inner(t))


def test_composition_domain_check():
    with pytest.raises(HorizonError):
        compose(PwFunction.identity(2), PwFunction.affine(1, 0, 3))


def test_super_additive_closure_of_concave():
    f = PwFunction.identity(4).scale(2).minimum(PwFunction.affine(1, 1, 4))
    assert super_additive_closure(f) == PwFunction.identity(4).scale(2)


def test_super_additive_closure_keeps_convex():
    f = PwFunction.rate_latency(3, 1, 5)
    assert super_additive_closure(f) == f


def test_super_additive_closure_rejects_burst():
    with pytest.raises(CurveError):
        super_additive_closure(PwFunction.token_bucket(1, 1, 3))


@pytest.mark.parametrize("seed", range(12))
def test_super_additive_closure_is_super_additive(seed):
    rng = random.Random(7000 + seed)
    f = random_function(rng, horizon=6, increasing=True, jumps=False)
    f = f - PwFunction.constant(f(0), f.horizon)
    g = super_additive_closure(f)
    assert f <= g
    pts = probe_points(rng, 6, n=12)
    for s in pts:
        for t in pts:
            if s + t <= 6:
                assert g(s + t) >= g(s) + g(t)


# --- deviations ---------------------------------------------------------------

def test_horizontal_deviation_token_bucket_rate_latency():
    alpha = PwFunction.token_bucket(2, 3, 4)
    beta = PwFunction.rate_latency(5, 1, 10)
    assert horizontal_deviation(alpha, beta) == F(8, 5)


@pytest.mark.parametrize("seed", SEEDS)
def test_horizontal_deviation_matches_oracle(seed):
    rng = random.Random(8000 + seed)
    alpha = random_function(rng, horizon=6, increasing=True)
    beta = random_function(rng, horizon=12, increasing=True)
    beta = beta + PwFunction.identity(12).scale(alpha(6))
    d = horizontal_deviation(alpha, beta)
    # oracle: for each t the smallest d with alpha(t) <= beta(t + d)
    inv = []
    for t in probe_points(rng, 6, set(alpha.breakpoints)):
        lo, hi = F(0), F(12) - t
        if beta(t) >= alpha(t):
            inv.append(F(0))
            continue
        while hi - lo > F(1, 10 ** 6):
            mid = (lo + hi) / 2
            if beta(t + mid) >= alpha(t):
                hi = mid
            else:
                lo = mid
        inv.append(lo)
    assert max(inv) <= d
    assert d - max(inv) < 1  # the sup can be reached at a limit between probes


def test_sufficient_horizon_crossing():
    alpha = PwFunction.token_bucket(2, 3, 10)
    beta = PwFunction.rate_latency(5, 1, 10)
    assert sufficient_horizon(alpha, beta) == F(8, 3)


def test_sufficient_horizon_zero_plus():
    alpha = PwFunction.zero(4)
    beta = PwFunction.token_bucket(1, 1, 4)
    assert sufficient_horizon(alpha, beta) == 4


def test_sufficient_horizon_missing():
    with pytest.raises(HorizonError):
        sufficient_horizon(PwFunction.token_bucket(2, 3, 2), PwFunction.rate_latency(5, 1, 2))


def test_one_sided_helper():
    f = PwFunction.stair(1, 1, 2)
    assert one_sided(f, F(1)) == [1, 1, 2]
