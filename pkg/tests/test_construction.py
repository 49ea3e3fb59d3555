import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from rcpolar.channels import ChannelModel
from rcpolar.construction import (
    GoodSetParams,
    Reliabilities,
    bec_bit_channels,
    bit_error_prob,
    design_llr_mean,
    ga_construct,
    genie_mc_construct,
    good_set_fraction,
    phi,
    phi_exact,
    phi_inv,
    read_index_file,
    read_reliabilities,
    select_info_set,
    union_bound,
    write_reliabilities,
)
from rcpolar.polar_core import CodeSpec


def phi_oracle(x):
    """1 - E[tanh(u/2)], u ~ N(x, 2x), by mpmath adaptive quadrature at 30 digits."""
    with mpmath.workdps(30):
        x = mpmath.mpf(x)
        f = lambda u: mpmath.tanh(u / 2) * mpmath.exp(-((u - x) ** 2) / (4 * x))
        s = mpmath.sqrt(x)
        pts = [-mpmath.inf, x - 40 * s, 0, x, x + 40 * s, mpmath.inf]
        return float(1 - mpmath.quad(f, sorted(set(pts))) / mpmath.sqrt(4 * mpmath.pi * x))


def bec_z_oracle(n, eps, punct=()):
    """Plain-python recursion on exact fractions, in the bit-reversed tree order."""
    N = 1 << n
    z = [Fraction(1) if i in punct else Fraction(eps) for i in range(N)]
    rev = [int(format(i, f"0{n}b")[::-1], 2) if n else 0 for i in range(N)]
    level = [[z[rev[i]] for i in range(N)]]
    while len(level[0]) > 1:
        nxt = []
        for v in level:
            h = len(v) // 2
            a, b = v[:h], v[h:]
            nxt.append([x + y - x * y for x, y in zip(a, b)])
            nxt.append([x * y for x, y in zip(a, b)])
        level = nxt
    return [float(v[0]) for v in level]


# ---------------------------------------------------------------- BEC recursion


def test_bec_noiseless_and_n1():
    assert not bec_bit_channels(4, 0.0).values.any()
    assert bec_bit_channels(1, 0.5).values.tolist() == [0.75, 0.25]


@pytest.mark.parametrize("n,eps,punct", [(3, 0.3, ()), (4, 0.5, (1, 6, 11)), (5, 0.2, (0, 8, 16, 24, 31))])
def test_bec_matches_fraction_oracle(n, eps, punct):
    assert np.allclose(bec_bit_channels(n, eps, punct).values, bec_z_oracle(n, eps, set(punct)), atol=1e-15)


def test_bec_n1_single_puncture_has_one_dead_channel():
    for p in (0, 1):
        cap = bec_bit_channels(1, 0.5, (p,)).capacity
        assert np.sum(cap == 0) == 1


def test_bec_sum_capacity_conserved():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = int(rng.integers(0, 17))
        punct = tuple(rng.choice(16, m, replace=False))
        cap = bec_bit_channels(4, 0.35, punct).capacity
        assert abs(cap.sum() - (16 - m) * 0.65) < 1e-9


def test_bec_rejects_bad_input():
    with pytest.raises(ValueError):
        bec_bit_channels(3, 1.2)
    with pytest.raises(ValueError):
        bec_bit_channels(3, 0.5, (8,))


# ---------------------------------------------------------------- phi


def test_phi_zero_and_monotone():
    assert phi(0.0) == 1.0
    xs = np.linspace(0, 60, 400)
    assert np.all(np.diff(phi(xs)) < 0)
    assert phi(200.0) < 1e-20


@pytest.mark.parametrize("x", [0.05, 1.0, 10.0, 40.0])
def test_phi_against_quadrature_oracle(x):
    want = phi_oracle(x)
    assert abs(phi_exact(x) - want) < 1e-8
    assert abs(phi(x) - want) < 1e-8 * max(1.0, want * 1e4)


def test_phi_relative_accuracy_in_tail():
    # the table is interpolated in log space, so relative error is what matters
    for x in (60.0, 120.0):
        assert abs(phi(x) / phi_oracle(x) - 1) < 1e-6


def test_phi_rejects_negative():
    with pytest.raises(ValueError):
        phi(-1.0)


def test_phi_inv():
    assert phi_inv(1.0) == 0.0
    for x in (0.1, 1.0, 5.0, 20.0):
        assert abs(phi_inv(phi(x)) - x) < 1e-6
    y = 0.5
    root = mpmath.findroot(lambda t: phi_oracle(float(t)) - y, (0.5, 3.0), solver="bisect", tol=1e-14)
    assert abs(phi_inv(y) - float(root)) < 1e-8
    for bad in (0.0, 1.5):
        with pytest.raises(ValueError):
            phi_inv(bad)


# ---------------------------------------------------------------- GA


def test_ga_n1():
    mu = design_llr_mean(2.0)
    assert np.allclose(ga_construct(1, 2.0, (0, 1)).values, 0.0)
    r = ga_construct(1, 2.0).values
    assert np.isclose(r[1], 2 * mu)
    assert np.isclose(r[0], phi_inv(1 - (1 - phi(mu)) ** 2), rtol=1e-9)
    assert ga_construct(1, 2.0, (0,)).values[0] == 0.0


def test_ga_override_and_mapping():
    assert np.isclose(design_llr_mean(0.0), 2 * 10**0.3)
    a = ga_construct(4, 0.0, llr_mean=2.0).values
    b = ga_construct(4, -3.0).values
    assert np.allclose(a, b)


def test_ga_punctured_count_zero():
    # every punctured output kills exactly one bit-channel mean
    vals = ga_construct(5, 3.0, (0, 16, 8, 24)).values
    assert np.sum(vals == 0) == 4


def test_ga_tracks_bec_order_on_n3():
    # at very low design SNR the GA and BEC orderings agree on this short code
    ga = select_info_set(ga_construct(3, 0.0), 4)
    bec = select_info_set(bec_bit_channels(3, 0.5), 4)
    assert ga == bec == (3, 5, 6, 7)


# ---------------------------------------------------------------- error probability, union bound, selection


def test_bit_error_prob():
    assert bit_error_prob(0.0) == 0.5
    grid = np.linspace(0, 50, 100)
    assert np.all(np.diff(bit_error_prob(grid)) < 0)
    assert abs(bit_error_prob(8.0) - 0.5 * math.erfc(2 / math.sqrt(2))) < 1e-12
    with pytest.raises(ValueError):
        bit_error_prob(-1.0)


def test_union_bound():
    pe = np.array([0.1, 0.2, 0.3])
    assert union_bound((), pe) == 0.0
    assert union_bound((1,), pe) == 0.2
    rel = ga_construct(5, 3.0)
    info = select_info_set(rel, 16)
    pe = rel.error_probs()
    total = math.fsum(float(pe[i]) for i in info)
    assert 0 < union_bound(info, pe) < math.inf
    assert abs(union_bound(info, pe) - total) < 1e-15 * max(total, 1)


def test_select_info_set():
    rel = bec_bit_channels(1, 0.5)
    assert select_info_set(rel, 1) == (1,)
    assert select_info_set(rel, 2) == (0, 1)
    with pytest.raises(ValueError):
        select_info_set(rel, 3)
    r = ga_construct(6, 2.0)
    scaled = Reliabilities(np.sqrt(r.values) * 3 + 1, "llr_mean")
    assert select_info_set(r, 20) == select_info_set(scaled, 20)


def test_select_ties_to_lower_index():
    rel = Reliabilities(np.array([0.5, 0.1, 0.1, 0.5]), "z")
    assert select_info_set(rel, 1) == (1,)


# ---------------------------------------------------------------- Monte Carlo


def binomial_se(p, trials):
    # from the exact probability: an estimate of 0 for a rare channel has zero sample spread
    return np.sqrt(p * (1 - p) / trials)


def test_genie_noiseless():
    ch = ChannelModel("awgn", 2, 1e-6)
    assert not genie_mc_construct(4, ch, trials=500, rng=1).values.any()


def test_genie_matches_bec_exact():
    exact = bec_bit_channels(3, 0.3).error_probs()
    est = genie_mc_construct(CodeSpec(3, (0,)), ChannelModel.bec(0.3), trials=40_000, rng=2)
    assert np.all(np.abs(est.values - exact) <= 3 * binomial_se(exact, 40_000))


def test_genie_punctured_matches_bec_exact():
    punct = (0, 4)
    exact = bec_bit_channels(3, 0.3, punct).error_probs()
    est = genie_mc_construct(3, ChannelModel.bec(0.3), punct, trials=40_000, rng=3)
    assert np.all(np.abs(est.values - exact) <= 3 * binomial_se(exact, 40_000) + 1e-12)


def test_genie_codeword_invariance():
    ch = ChannelModel.from_snr_db("awgn", 1.0, 2)
    a = genie_mc_construct(5, ch, trials=20_000, rng=4)
    b = genie_mc_construct(5, ch, trials=20_000, rng=5, random_codeword=True)
    se = np.sqrt(a.stderr**2 + b.stderr**2)
    assert np.all(np.abs(a.values - b.values) <= 4 * se + 1e-12)


def test_genie_rank_agrees_with_ga():
    ch = ChannelModel.from_snr_db("awgn", 2.0, 2)
    est = genie_mc_construct(5, ch, trials=20_000, rng=6)
    ga = ga_construct(5, 0.0, llr_mean=2 / ch.sigma2)
    assert set(select_info_set(est, 8)) == set(select_info_set(ga, 8))


# ---------------------------------------------------------------- good set


def test_good_set_limits():
    assert good_set_fraction(bec_bit_channels(6, 0.0)) == 1.0
    assert good_set_fraction(bec_bit_channels(6, 1.0)) == 0.0
    with pytest.raises(ValueError):
        good_set_fraction(ga_construct(3, 1.0))
    with pytest.raises(ValueError):
        GoodSetParams(0.7)


def test_good_set_bec_half_n14():
    # exact recursion value; the asymptotic 0.5 is far from reached at this length
    assert good_set_fraction(bec_bit_channels(14, 0.5), GoodSetParams(0.3)) == 0.33740234375


def test_good_set_n10_matches_oracle():
    z = np.array(bec_z_oracle(10, 0.5))
    thr = 2.0 ** (-(1024**0.3)) / 1024
    assert good_set_fraction(bec_bit_channels(10, 0.5)) == np.mean(z < thr)


# ---------------------------------------------------------------- files


def test_reliability_roundtrip(tmp_path):
    rel = ga_construct(4, 1.5, (3,))
    path = tmp_path / "r.csv"
    write_reliabilities(path, rel, "n=4\nchannel=awgn")
    text = path.read_text().splitlines()
    assert text[0] == "# n=4" and text[2] == "index,value,kind"
    back = read_reliabilities(path)
    assert back.kind == "llr_mean" and np.array_equal(back.values, rel.values)


def test_index_file(tmp_path):
    p = tmp_path / "p.txt"
    p.write_text("# punct\nbase_n=5\n3\n\n7\n")
    assert read_index_file(p) == (3, 7)
    p.write_text("3\nx\n")
    with pytest.raises(ValueError, match=":2:"):
        read_index_file(p)


def test_dead_channels_exact_on_long_codes():
    # the weakest unpunctured channel at n=12 has capacity 0.5^4096, below the double range
    punct = tuple(range(0, 4096, 32)) + tuple(range(16, 4096, 32))
    cap = bec_bit_channels(12, 0.5, punct).capacity
    assert np.sum(cap == 0) == len(punct)
    assert abs(cap.sum() - (4096 - len(punct)) * 0.5) < 1e-9
