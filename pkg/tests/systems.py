"""Reference systems and random DRR configurations shared by the tests."""

import random
from fractions import Fraction

from drrcalc.arrivals import GroupedTokenBucket, Stair, TokenBucket
from drrcalc.drr import DrrConfig, beta0
from drrcalc.refine import system_horizon

F = Fraction

# single server of the industrial use case
TABLE1_CLASSES = ("electric-protection", "vr-games", "video-conference", "4k-video")
TABLE1_CFG = DrrConfig(quanta=(16000,) * 4, l_max=(3040, 12000, 12000, 12000),
                       rate=5 * 10**9, epsilon=1)
TABLE1_ARRIVALS = [TokenBucket(8_521_000, 42_560), TokenBucket(180_000_000, 2_160_000),
                   TokenBucket(162_000_000, 3_240_000), TokenBucket(180_000_000, 7_200_000)]

# three flows, 199-byte quanta, 100-byte packets, epsilon one byte
FIG2_CFG = DrrConfig(quanta=(1592,) * 3, l_max=(800,) * 3, rate=10**8, epsilon=8)
FIG6_ARRIVALS = [TokenBucket(F(5 * 800, 512) * 10**6, 4000),
                 TokenBucket(F(800, 512) * 10**6, 800),
                 TokenBucket(F(800, 512) * 10**6, 800)]


def random_cfg(rng: random.Random, n=None, latency=True, rational=True) -> DrrConfig:
    """Small DRR subsystem; every quantum and l_max is a multiple of epsilon."""
    n = n or rng.choice((2, 3, 4))
    eps = F(1, rng.choice((1, 2, 3))) if rational else F(1)
    l_max = [eps * rng.randint(2, 14) for _ in range(n)]
    quanta = [lm + eps * rng.randint(0, 16) for lm in l_max]
    rate = F(rng.randint(50, 400) * 1000, rng.choice((1, 2, 7)))
    lat = F(rng.randint(0, 6), rng.choice((1, 3, 10)) * 1000) if latency else F(0)
    return DrrConfig(quanta=tuple(quanta), l_max=tuple(l_max), rate=rate, latency=lat, epsilon=eps)


def random_token_bucket(rng, cfg, i):
    share = cfg.max_guaranteed_rate(i)
    rate = share * F(rng.randint(1, 80), 100)
    burst = cfg.epsilon * rng.randint(1, 80)
    return TokenBucket(rate, burst)


def random_grouped(rng, cfg, i):
    tb = random_token_bucket(rng, cfg, i)
    link = cfg.rate * F(rng.randint(100, 300), 100)
    lm = cfg.epsilon * rng.randint(1, 40)
    return GroupedTokenBucket(link, lm, tb.rate, tb.burst + lm)


def random_stair(rng, cfg, i):
    share = cfg.max_guaranteed_rate(i)
    height = cfg.epsilon * rng.randint(1, 60)
    # long-term rate height / period below the share
    period = height / (share * F(rng.randint(5, 80), 100))
    return Stair(height, period)


def random_arrivals(rng, cfg):
    makers = (random_token_bucket, random_stair)
    return [rng.choice(makers)(rng, cfg, i) for i in range(cfg.n)]


def light_system(rng, n=3, load=(10, 50), max_rounds=30):
    """Config plus arrivals whose busy periods span at most ``max_rounds`` rounds."""
    while True:
        cfg, arrivals = _light_draw(rng, n, load)
        t_star = system_horizon(cfg, arrivals, lambda j, h: beta0(cfg, j, h)).t_star
        if (t_star - cfg.latency) * cfg.rate <= max_rounds * cfg.q_tot:
            return cfg, arrivals


def _light_draw(rng, n, load):
    cfg = random_cfg(rng, n=n)
    arrivals = []
    for i in range(n):
        share = cfg.max_guaranteed_rate(i) * F(rng.randint(*load), 100)
        if rng.random() < 0.3:
            height = cfg.l_max[i]
            arrivals.append(Stair(height, height / share))
        else:
            arrivals.append(TokenBucket(share, cfg.l_max[i] * rng.randint(1, 3)))
    return cfg, arrivals
