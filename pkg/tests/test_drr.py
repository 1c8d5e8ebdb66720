"""DRR interference staircases, strict service curves and delay bounds."""

import random
from fractions import Fraction as F

import pytest

from drrcalc.arrivals import GroupedTokenBucket, Stair, TokenBucket
from drrcalc.drr import (
    ConfigError, DrrConfig, UnstableError, beta0, beta0_delay, boyer_curve, boyer_delay,
    boyer_params, check_stable, closed_form_delay, convex_curve, find_horizon, gamma,
    gamma_by_formula, gamma_min_latency, gamma_subset, lower_bound_from_phi, max_service_curve,
    phi, phi_concave, phi_max_rate, phi_max_rate_params, phi_min_latency, phi_value, psi,
    psi_bar_value, psi_left_value, psi_value, soni_delay, subsets,
)
from drrcalc.minplus import PwFunction, compose, horizontal_deviation, lower_pseudo_inverse
from drrcalc.network import format_delay
from drrcalc.sim import counterexample_config

from oracles import probe_points
from systems import FIG2_CFG, TABLE1_ARRIVALS, TABLE1_CFG, random_cfg, random_grouped, \
    random_stair, random_token_bucket


def _sample(rng, *fs, n=40):
    h = min(f.horizon for f in fs)
    extra = set()
    for f in fs:
        extra |= {b for b in f.breakpoints if b <= h}
    return probe_points(rng, h, extra, n)


def _ge(f, g, xs):
    """f >= g at xs, including one-sided limits."""
    for x in xs:
        assert f(x) >= g(x)
        if x > 0:
            assert f.left_limit(x) >= g.left_limit(x)
        if x < min(f.horizon, g.horizon):
            assert f.right_limit(x) >= g.right_limit(x)


# --- staircases -------------------------------------------------------------

def test_phi_values_on_small_system():
    assert FIG2_CFG.d_max(0) == 792
    assert phi_value(FIG2_CFG, 0, 1, 0) == 2384
    assert phi_value(FIG2_CFG, 0, 1, 800) == 3976
    assert psi_value(FIG2_CFG, 0, 800) == 8752


def test_phi_curve_matches_values():
    f = phi(FIG2_CFG, 0, 1, 5000)
    for x in [0, 799, 800, 801, 2391, 2392, 4999]:
        assert f(x) == phi_value(FIG2_CFG, 0, 1, x)
    # right-continuous steps at k Q_i - d_i
    assert f.left_limit(800) == 2384 and f(800) == 3976


def test_phi_needs_distinct_flows():
    with pytest.raises(ConfigError):
        phi(FIG2_CFG, 1, 1, 10)


@pytest.mark.parametrize("seed", range(20))
def test_psi_strictly_increasing(seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng)
    for i in range(cfg.n):
        for js in subsets(cfg.others(i)):
            f = psi(cfg, i, 5 * cfg.q_tot, js)
            assert all(seg[3] >= 1 for seg in f.segments[:-1])
            assert f.is_nondecreasing()


@pytest.mark.parametrize("seed", range(15))
def test_psi_left_value_is_left_limit(seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng)
    f = psi(cfg, 0, 4 * cfg.q_tot)
    for x in f.breakpoints[1:]:
        assert psi_left_value(cfg, 0, x) == f.left_limit(x)


def test_gamma_inverts_psi_at_first_step():
    cfg = FIG2_CFG
    x = cfg.quanta[0] - cfg.d_max(0)
    g = gamma(cfg, 0, 3 * cfg.q_tot)
    assert g(psi_value(cfg, 0, x)) == x


@pytest.mark.parametrize("seed", range(25))
def test_gamma_is_pseudo_inverse_of_psi(seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng)
    i = rng.randrange(cfg.n)
    js = rng.choice(subsets(cfg.others(i)))
    x_max = 6 * cfg.q_tot
    inv = lower_pseudo_inverse(psi(cfg, i, x_max, js))
    y_max = psi_value(cfg, i, x_max - cfg.q_tot, js)
    g = gamma_subset(cfg, i, js, y_max)
    xs = [b for b in g.breakpoints] + [F(rng.randint(0, 10**6), 10**6) * y_max for _ in range(1000)]
    for y in xs:
        assert g(y) == inv(y)


@pytest.mark.parametrize("seed", range(20))
def test_gamma_formula_matches_construction(seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng)
    i = rng.randrange(cfg.n)
    js = rng.choice(subsets(cfg.others(i)))
    y_max = 7 * cfg.q_tot
    assert gamma_subset(cfg, i, js, y_max) == gamma_by_formula(cfg, i, y_max, js)


def test_empty_subset_pattern_is_identity_after_first_round():
    cfg = FIG2_CFG
    g = gamma_subset(cfg, 0, (), 10 * cfg.q_tot)
    assert g == PwFunction.identity(10 * cfg.q_tot)


def test_bad_subset_rejected():
    with pytest.raises(ConfigError):
        gamma_subset(FIG2_CFG, 0, (0, 1), 100)


# --- affine bounds and the curves built on them ------------------------------

def test_max_rate_bound_offset():
    slope, offset = phi_max_rate_params(FIG2_CFG, 0, 1)
    assert slope == 1 and offset == 3176
    assert phi_max_rate(FIG2_CFG, 0, 1, 10)(0) == 3176


@pytest.mark.parametrize("seed", range(15))
def test_phi_below_concave_below_affine(seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng)
    i, j = rng.sample(range(cfg.n), 2)
    x_max = 5 * cfg.q_tot
    exact, conc = phi(cfg, i, j, x_max), phi_concave(cfg, i, j, x_max)
    xs = _sample(rng, exact, conc)
    _ge(conc, exact, xs)
    _ge(phi_max_rate(cfg, i, j, x_max), conc, xs)
    _ge(phi_min_latency(cfg, i, j, x_max), conc, xs)


def test_boyer_parameters_on_small_system():
    r, t = boyer_params(FIG2_CFG, 0)
    assert r == F(1, 3)
    assert t / FIG2_CFG.rate == F(6352, 10**8)  # 63.52 us


@pytest.mark.parametrize("seed", range(20))
def test_boyer_curve_matches_rate_latency_formula(seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng)
    i = rng.randrange(cfg.n)
    r, t = boyer_params(cfg, i)
    h = cfg.latency + 6 * cfg.q_tot / cfg.rate
    expected = PwFunction.rate_latency(r * cfg.rate, cfg.latency + t / cfg.rate, h)
    assert boyer_curve(cfg, i, h) == expected


@pytest.mark.parametrize("seed", range(20))
def test_domination_chain(seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng)
    i = rng.randrange(cfg.n)
    h = cfg.latency + 8 * cfg.q_tot / cfg.rate
    b0, cv, by = beta0(cfg, i, h), convex_curve(cfg, i, h), boyer_curve(cfg, i, h)
    beta = cfg.beta(h)
    ml = compose(gamma_min_latency(cfg, i, beta(h)), beta)
    xs = _sample(rng, b0, cv, by, ml)
    _ge(b0, cv, xs)
    _ge(cv, by, xs)
    _ge(cv, ml, xs)
    assert b0 <= beta


@pytest.mark.parametrize("seed", range(10))
def test_lower_bound_from_phi_choices(seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng, n=3)
    i = rng.randrange(cfg.n)
    h = cfg.latency + 6 * cfg.q_tot / cfg.rate
    others = cfg.others(i)
    built = lambda fn: lower_bound_from_phi(cfg, i, {j: (lambda x, j=j: fn(cfg, i, j, x)) for j in others}, h)
    assert built(phi) == beta0(cfg, i, h)
    assert built(phi_max_rate) == boyer_curve(cfg, i, h)
    assert built(phi_concave) == convex_curve(cfg, i, h)


def test_lower_bound_from_phi_rejects_non_dominating():
    cfg = FIG2_CFG
    h = F(1, 10**4)
    too_low = {j: PwFunction.constant(0, cfg.rate * h) for j in cfg.others(0)}
    with pytest.raises(ValueError):
        lower_bound_from_phi(cfg, 0, too_low, h)


# --- delay bounds -----------------------------------------------------------

def test_table1_boyer_and_strict_curve_columns():
    boyer = [boyer_delay(TABLE1_CFG, i, a) for i, a in enumerate(TABLE1_ARRIVALS)]
    strict = [beta0_delay(TABLE1_CFG, i, a) for i, a in enumerate(TABLE1_ARRIVALS)]
    # the table truncates to its precision
    assert F(52, 10**6) < boyer[0] < F(53, 10**6)
    assert [format_delay(d) for d in boyer[1:]] == ["1.75 ms", "2.61 ms", "5.78 ms"]
    assert [format_delay(d) for d in strict] == ["44.51 us", "1.74 ms", "2.61 ms", "5.77 ms"]


def test_table1_closed_form_class2():
    d = closed_form_delay(TABLE1_CFG, 1, TABLE1_ARRIVALS[1])
    assert d == beta0_delay(TABLE1_CFG, 1, TABLE1_ARRIVALS[1])
    assert format_delay(d) == "1.74 ms"


def _affine_in_epsilon(fn):
    """(A, B) with fn(eps) = A l/c - B eps/c, from two epsilon values."""
    l, c = 800, 10**8
    lo, hi = fn(1, l, c), fn(8, l, c)
    b = (lo - hi) / 7 * c
    return (lo * c + b) / l, b


def test_counterexample_boyer_symbolic():
    def boyer(eps, l, c):
        cfg, arr = counterexample_config(l, c, eps)
        return boyer_delay(cfg, 0, arr[0])
    assert _affine_in_epsilon(boyer) == (F(183, 10), F(215, 100))


def test_counterexample_soni_symbolic():
    def soni(eps, l, c):
        cfg, arr = counterexample_config(l, c, eps)
        return soni_delay(cfg, 0, arr)
    a, b = _affine_in_epsilon(soni)
    assert round(float(a), 5) == 14.03383
    assert round(float(b), 6) == 1.236215


def test_counterexample_bounds_in_microseconds():
    cfg, arr = counterexample_config(800, 10**8, 8)
    assert round(float(boyer_delay(cfg, 0, arr[0])) * 10**6, 3) == 146.228
    assert round(float(soni_delay(cfg, 0, arr)) * 10**6, 3) == 112.172


def test_soni_needs_constant_rate_server():
    cfg = DrrConfig((10, 10), (5, 5), rate=100, latency=1)
    with pytest.raises(ConfigError):
        soni_delay(cfg, 0, [TokenBucket(1, 5), TokenBucket(1, 5)])


@pytest.mark.parametrize("maker", [random_token_bucket, random_grouped, random_stair])
@pytest.mark.parametrize("seed", range(12))
def test_closed_form_matches_curve_delay(maker, seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng)
    i = rng.randrange(cfg.n)
    a = maker(rng, cfg, i)
    assert closed_form_delay(cfg, i, a) == beta0_delay(cfg, i, a)


def test_closed_form_degenerate_mod():
    cfg = random_cfg(random.Random(5))
    qi, di = cfg.quanta[0], cfg.d_max(0)
    # (b + d_i) is an exact multiple of Q_i
    a = TokenBucket(cfg.max_guaranteed_rate(0) / 3, 2 * qi - di)
    assert closed_form_delay(cfg, 0, a) == beta0_delay(cfg, 0, a)


def test_closed_form_rejects_slow_link_and_shift():
    cfg = FIG2_CFG
    with pytest.raises(ConfigError):
        closed_form_delay(cfg, 0, GroupedTokenBucket(cfg.rate / 2, 800, 10**6, 4000))
    with pytest.raises(ConfigError):
        closed_form_delay(cfg, 0, Stair(800, F(1, 1000), F(1, 10**5)))


def test_unstable_flow_rejected():
    cfg = FIG2_CFG
    with pytest.raises(UnstableError):
        closed_form_delay(cfg, 0, TokenBucket(cfg.rate / 2, 800))
    with pytest.raises(UnstableError):
        check_stable(cfg, [TokenBucket(cfg.max_guaranteed_rate(0), 8)] * 3)


def test_horizon_cap_env(monkeypatch):
    cfg = FIG2_CFG
    a = TokenBucket(cfg.max_guaranteed_rate(0) / 2, 10**5)
    monkeypatch.setenv("DRRCALC_HORIZON_CAP_S", "1/1000")
    with pytest.raises(UnstableError):
        find_horizon(a, lambda h: beta0(cfg, 0, h), F(1, 10**5))
    monkeypatch.delenv("DRRCALC_HORIZON_CAP_S")
    assert find_horizon(a, lambda h: beta0(cfg, 0, h), F(1, 10**5)) > F(1, 1000)


def test_delay_equals_horizontal_deviation():
    cfg = FIG2_CFG
    a = TokenBucket(10**6, 4000)
    d = beta0_delay(cfg, 0, a)
    h = 4 * d
    assert d == horizontal_deviation(a.curve(h), beta0(cfg, 0, h))


# --- maximum service of an interferer ----------------------------------------

def test_psi_bar_at_first_edge():
    cfg = FIG2_CFG
    qj, dj, di = cfg.quanta[1], cfg.d_max(1), cfg.d_max(0)
    assert psi_bar_value(cfg, 0, 1, qj + dj) == qj + dj - di


@pytest.mark.parametrize("seed", range(15))
def test_max_service_curve_formula_matches_generic(seed):
    rng = random.Random(seed)
    cfg = random_cfg(rng)
    i, j = rng.sample(range(cfg.n), 2)
    h = 6 * cfg.q_tot / cfg.rate
    generic = max_service_curve(cfg, i, j, h)
    formula = max_service_curve(cfg, i, j, h, use_formula=True)
    xs = _sample(rng, generic, formula)
    _ge(formula, generic, xs)
    assert generic(0) == 0
    assert generic <= PwFunction.identity(h).scale(cfg.rate)


# --- configuration ----------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    dict(quanta=(), l_max=(), rate=1),
    dict(quanta=(10,), l_max=(11,), rate=1),
    dict(quanta=(10,), l_max=(5,), rate=0),
    dict(quanta=(0,), l_max=(5,), rate=1),
    dict(quanta=(10,), l_max=(5,), rate=1, epsilon=0),
    dict(quanta=(10,), l_max=(F(1, 2),), rate=1),
    dict(quanta=(10,), l_max=(5,), rate=1, latency=-1),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        DrrConfig(**kwargs)


def test_subsets_largest_first_and_cap():
    assert subsets([1, 2]) == [(1, 2), (1,), (2,), ()]
    with pytest.raises(ConfigError):
        subsets(range(5), cap=4)


def test_beta0_is_super_additive_for_rate_latency():
    cfg = DrrConfig((6, 4, 5), (3, 2, 4), rate=10, latency=F(1, 2))
    for i in range(3):
        plain = beta0(cfg, i, 12)
        assert beta0(cfg, i, 12, closure=True) == plain


def test_beta0_closure_for_general_aggregate_curve():
    # the rate drops from 10 to 1 after 2 s: not super-additive
    h = F(10)
    agg = PwFunction.rate_latency(10, 1, h).minimum(PwFunction.affine(1, 8, h))
    cfg = DrrConfig((6, 4), (3, 2), service_curve=agg)
    plain = beta0(cfg, 0, h)
    closed = beta0(cfg, 0, h, closure=True)
    assert plain <= closed and plain != closed
    for s in probe_points(random.Random(1), h, n=12):
        for t in probe_points(random.Random(2), h - s, n=12):
            assert closed(s + t) >= closed(s) + closed(t)
