"""Bit-channel reliability estimation and information-set selection.

All reliability vectors are indexed by input position ``i`` (SC decoding
order); channel-side vectors (erasure probabilities, LLR means, puncture
sets) are indexed by codeword output position ``j``. The tree recursions
map outputs onto the natural-order transform through the bit reversal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator
from scipy.special import ndtr

from .polar_core import CodeSpec, bit_reversal_perm

KINDS = ("z", "llr_mean", "error_prob")

# The design SNR of the Gaussian approximation is Es/N0 with sigma^2 = N0/2
# per real dimension, the factor two being taken as exactly 3 dB. This is the
# convention under which the published base-code puncturing sequence is
# reproduced (see tests/test_acceptance.py).
DESIGN_SNR_OFFSET_DB = 3.0


@dataclass(frozen=True)
class Reliabilities:
    """Per-input-index reliability values of one kind.

    ``kind`` is ``"z"`` (Bhattacharyya / erasure probability), ``"llr_mean"``
    or ``"error_prob"``. ``stderr`` is attached to Monte-Carlo estimates and
    ``capacity`` to exact BEC results.
    """

    values: np.ndarray
    kind: str
    stderr: np.ndarray | None = None
    capacity: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reliability kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        N = v.shape[-1]
        if N & (N - 1):
            raise ValueError("length must be a power of two")
        if self.kind == "llr_mean":
            if np.any(v < 0):
                raise ValueError("LLR means must be nonnegative")
        elif np.any((v < 0) | (v > 1)):
            raise ValueError(f"{self.kind} values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[-1]

    def error_probs(self) -> np.ndarray:
        """Bit error probability under genie-aided SC (coin flip on erasure for the BEC)."""
        if self.kind == "error_prob":
            return self.values
        if self.kind == "llr_mean":
            return bit_error_prob(self.values)
        return self.values / 2.0

    def badness(self) -> np.ndarray:
        """Sort key, smaller is more reliable."""
        return -self.values if self.kind == "llr_mean" else self.values


# ---------------------------------------------------------------------------- tree recursion


def _polarize(out_vals: np.ndarray, upper, lower) -> np.ndarray:
    """Run the SC decoding tree from per-output values (last axis) to per-input values.

    ``upper(a, b)`` gives the first-half (check-node) child and ``lower(a, b)``
    the second-half (variable-node) child of a node whose halves are ``a``, ``b``.
    Works breadth-first so every distinct node value is tracked.
    """
    N = out_vals.shape[-1]
    n = N.bit_length() - 1
    lead = out_vals.shape[:-1]
    v = np.asarray(out_vals, dtype=float)[..., bit_reversal_perm(n)]
    v = v.reshape(*lead, 1, N)
    while v.shape[-1] > 1:
        h = v.shape[-1] // 2
        a, b = v[..., :h], v[..., h:]
        v = np.stack([upper(a, b), lower(a, b)], axis=-2).reshape(*lead, -1, h)
    return v.reshape(*lead, N)


def _punct_mask(N: int, punct) -> np.ndarray:
    mask = np.zeros(N, dtype=bool)
    idx = np.asarray(sorted(punct), dtype=np.int64) if len(punct) else np.zeros(0, np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= N):
        raise ValueError(f"puncture indices must lie in [0, {N})")
    mask[idx] = True
    return mask


def bec_bit_channels(n: int, eps: float, punct=()) -> Reliabilities:
    """Exact bit-channel erasure probabilities on BEC(eps) with punctured outputs.

    Punctured outputs are erased with probability one. Capacities are tracked
    alongside, and a capacity is exactly zero only for channels that carry no
    information; on long codes a positive capacity that underflows is reported
    as the smallest positive double instead.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    N = 1 << n
    mask = _punct_mask(N, punct)
    cap0 = np.where(mask, 0.0, 1.0 - eps)
    cap = _polarize(cap0, lambda a, b: a * b, lambda a, b: a + b - a * b)
    # exact zero-capacity bookkeeping: the check node is dead if either input is, the variable node if both are
    dead = _polarize((cap0 == 0).astype(float), np.maximum, np.minimum) > 0
    cap = np.where(dead, 0.0, np.maximum(cap, np.nextafter(0.0, 1.0)))
    z0 = np.where(mask, 1.0, eps)
    z = _polarize(z0, lambda a, b: 1.0 - (1.0 - a) * (1.0 - b), lambda a, b: a * b)
    return Reliabilities(np.clip(z, 0.0, 1.0), "z", capacity=cap)


def bec_z_batch(n: int, eps: float, punct_masks: np.ndarray) -> np.ndarray:
    """Erasure probabilities for a batch of boolean output puncture masks ``(B, N)``."""
    z0 = np.where(punct_masks, 1.0, eps)
    return _polarize(z0, lambda a, b: 1.0 - (1.0 - a) * (1.0 - b), lambda a, b: a * b)


# ---------------------------------------------------------------------------- phi


def _log_phi_quad(x: float) -> float:
    """``log phi(x)`` from phi(x) = 2/sqrt(pi) e^{-x/4} int_0^inf sech(sqrt(x) t) e^{-t^2} dt."""
    if x == 0.0:
        return 0.0
    r = math.sqrt(x)

    def f(t):
        # sech(z) e^{-t^2} written to avoid overflow of cosh
        z = r * t
        return 2.0 * math.exp(-z - t * t) / (1.0 + math.exp(-2.0 * z))

    brk = min(50.0 / r, 10.0)
    v = integrate.quad(f, 0.0, brk, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    v += integrate.quad(f, brk, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    return math.log(2.0 / math.sqrt(math.pi) * v) - x / 4.0


def _one_minus_phi_quad(x: float) -> float:
    """``1 - phi(x) = int_0^inf tanh(u/2) (1 - e^{-u}) p(u) du`` with p = N(x, 2x); no cancellation."""
    s = math.sqrt(2.0 * x)

    def f(u):
        return math.tanh(u / 2.0) * -math.expm1(-u) * math.exp(-((u - x) ** 2) / (4.0 * x))

    hi = x + 40.0 * s
    pts = [p for p in (x, x + 5 * s) if 0 < p < hi]
    v = integrate.quad(f, 0.0, hi, points=pts or None, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    return v / math.sqrt(4.0 * math.pi * x)


def _neg_log_phi_exact(x: float) -> float:
    if x == 0.0:
        return 0.0
    if x < 1.0:
        return -math.log1p(-_one_minus_phi_quad(x))
    return -_log_phi_quad(x)


def phi_exact(x: float) -> float:
    """phi by direct adaptive quadrature (slow path, used to build the table and as a check)."""
    if x < 0:
        raise ValueError("phi is defined for x >= 0")
    return math.exp(-_neg_log_phi_exact(float(x)))


_X_LO, _X_HI, _GRID = 1e-6, 2e4, 3000


@lru_cache(maxsize=1)
def _phi_table():
    s = np.linspace(math.log(_X_LO), math.log(_X_HI), _GRID)
    g = np.log([_neg_log_phi_exact(math.exp(v)) for v in s])
    return PchipInterpolator(s, g), PchipInterpolator(g, s), g[0], g[-1]


def _neg_log_phi_small(x):
    # phi = 1 - x/2 + x^2/4 - 5x^3/24 + O(x^4)
    return -np.log1p(-x / 2.0 + x * x / 4.0 - 5.0 * x**3 / 24.0)


def _neg_log_phi_large(x):
    # phi ~ sqrt(pi/x) e^{-x/4} (1 - pi^2/(4x) + 5 pi^4/(32 x^2))
    corr = 1.0 - np.pi**2 / (4.0 * x) + 5.0 * np.pi**4 / (32.0 * x * x)
    return x / 4.0 - 0.5 * np.log(np.pi / x) - np.log(corr)


def neg_log_phi(x) -> np.ndarray:
    """``-log phi(x)``, vectorised, from the memoised table."""
    fwd, _, _, _ = _phi_table()
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    lo = (x > 0) & (x < _X_LO)
    hi = x > _X_HI
    mid = (x >= _X_LO) & ~hi
    out[lo] = _neg_log_phi_small(x[lo])
    out[hi] = _neg_log_phi_large(x[hi])
    out[mid] = np.exp(fwd(np.log(x[mid])))
    return out


def phi(x):
    """phi(x) = 1 - E[tanh(u/2)], u ~ N(x, 2x); phi(0) = 1. Accepts scalars or arrays."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("phi is defined for x >= 0")
    out = np.exp(-neg_log_phi(xa))
    return float(out) if np.ndim(x) == 0 else out


def phi_inv_neglog(t) -> np.ndarray:
    """Inverse of ``neg_log_phi``: the ``x >= 0`` with ``-log phi(x) = t`` (vectorised)."""
    _, inv, g_lo, g_hi = _phi_table()
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    if not np.any(pos):
        return out
    lg = np.full(t.shape, -np.inf)
    lg[pos] = np.log(t[pos])
    mid = pos & (lg >= g_lo) & (lg <= g_hi)
    out[mid] = np.exp(inv(lg[mid]))
    small = pos & (lg < g_lo)
    if np.any(small):
        # invert the series: phi = e^{-t}; x = 2(1-phi) + ... refined by Newton
        y = -np.expm1(-t[small])
        xs = 2.0 * y
        for _ in range(3):
            f = _neg_log_phi_small(xs) - t[small]
            df = (0.5 - xs / 2.0 + 5.0 * xs * xs / 8.0) / (1.0 - xs / 2.0 + xs * xs / 4.0)
            xs = xs - f / df
        out[small] = xs
    big = pos & (lg > g_hi)
    if np.any(big):
        tb = t[big]
        xb = 4.0 * tb
        for _ in range(8):
            xb = xb - (_neg_log_phi_large(xb) - tb) / (0.25 + 0.5 / xb)
        out[big] = xb
    return out


def phi_inv(y: float) -> float:
    """Inverse of phi on (0, 1] by bracketing root search (absolute tolerance 1e-9 or better)."""
    if not 0.0 < y <= 1.0:
        raise ValueError("phi_inv is defined on (0, 1]")
    if y == 1.0:
        return 0.0
    t = -math.log(y)
    guess = float(phi_inv_neglog(t))
    lo, hi = guess * 0.5, guess * 2.0 + 1e-12
    while neg_log_phi(lo) > t:
        lo *= 0.5
    while neg_log_phi(hi) < t:
        hi *= 2.0
    return optimize.brentq(lambda v: float(neg_log_phi(v)) - t, lo, hi, xtol=1e-13, rtol=1e-15)


def _check_node_mean(a, b):
    """E[L(u1)] = phi^-1(1 - (1 - phi(a))(1 - phi(b))), computed in the -log phi domain."""
    ta, tb = neg_log_phi(a), neg_log_phi(b)
    # 1-(1-pa)(1-pb) = pa + pb - pa pb
    lo = np.minimum(ta, tb)
    hi = np.maximum(ta, tb)
    # -log(pa + pb - pa pb) = lo - log(1 + e^{lo-hi} (1 - e^{-lo})), no overflow since lo <= hi
    t = lo - np.log1p(-np.exp(lo - hi) * np.expm1(-lo))
    return phi_inv_neglog(np.maximum(t, 0.0))


def ga_llr_means(out_means) -> np.ndarray:
    """Gaussian-approximation density evolution from per-output LLR means (batched).

    A punctured output has mean 0 (infinite noise variance).
    """
    return _polarize(np.asarray(out_means, dtype=float), _check_node_mean, lambda a, b: a + b)


def design_llr_mean(design_snr_db: float) -> float:
    """Mean channel LLR ``2/sigma^2`` of a transmitted output at the given design SNR."""
    return 2.0 * 10.0 ** ((design_snr_db + DESIGN_SNR_OFFSET_DB) / 10.0)


def ga_construct(n: int, design_snr_db: float, punct=(), llr_mean: float | None = None) -> Reliabilities:
    """Bit-channel LLR means by GA; ``llr_mean`` overrides the design-SNR mapping."""
    N = 1 << n
    mu = design_llr_mean(design_snr_db) if llr_mean is None else float(llr_mean)
    out = np.where(_punct_mask(N, punct), 0.0, mu)
    return Reliabilities(ga_llr_means(out), "llr_mean")


def bit_error_prob(llr_mean):
    """Q(sqrt(mean/2)) for a consistent Gaussian LLR with the given mean."""
    m = np.asarray(llr_mean, dtype=float)
    if np.any(m < 0):
        raise ValueError("LLR mean must be nonnegative")
    out = ndtr(-np.sqrt(m / 2.0))
    return float(out) if np.ndim(llr_mean) == 0 else out


def union_bound(info_set, error_probs) -> float:
    idx = np.asarray(list(info_set), dtype=np.int64)
    return float(np.sum(np.asarray(error_probs, dtype=float)[..., idx], axis=-1)) if idx.size else 0.0


def select_info_set(rel: Reliabilities, k: int) -> tuple[int, ...]:
    """The ``k`` most reliable indices; ties go to the lower index."""
    N = rel.N
    if not 0 <= k <= N:
        raise ValueError(f"k={k} outside [0, {N}]")
    order = np.lexsort((np.arange(N), rel.badness()))
    return tuple(sorted(order[:k].tolist()))


# ---------------------------------------------------------------------------- Monte Carlo


def genie_mc_construct(spec: CodeSpec | int, channel, punct=(), trials: int = 100_000, rng=None,
                       random_codeword: bool = False, batch: int = 4096) -> Reliabilities:
    """Bit-channel error probabilities by genie-aided SC over ``channel`` (binary transmission).

    Every input position is treated as unfrozen; punctured outputs receive LLR 0.
    Standard errors are attached.
    """
    from .channels import channel_llrs
    from .decoders import genie_sc
    from .polar_core import encode

    if trials < 1:
        raise ValueError("trials must be >= 1")
    if channel.M != 2:
        raise ValueError("genie construction uses binary transmission")
    n = spec if isinstance(spec, int) else spec.n
    N = 1 << n
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    mask = _punct_mask(N, punct)
    all_info = CodeSpec(n, tuple(range(N)))
    errors = np.zeros(N, dtype=np.int64)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        if random_codeword:
            u = rng.integers(0, 2, size=(b, N), dtype=np.uint8)
        else:
            u = np.zeros((b, N), dtype=np.uint8)
        x = encode(u, n)
        llr = channel_llrs(x, channel, rng)
        llr[:, mask] = 0.0
        errors += genie_sc(llr, all_info, u, rng).sum(axis=0)
        done += b
    p = errors / trials
    return Reliabilities(p, "error_prob", stderr=np.sqrt(p * (1 - p) / trials))


# ---------------------------------------------------------------------------- good set


@dataclass(frozen=True)
class GoodSetParams:
    beta: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.beta < 0.5:
            raise ValueError("beta must lie in (0, 1/2)")

    def threshold(self, N: int) -> float:
        return 2.0 ** (-(N**self.beta)) / N


def good_set_fraction(rel: Reliabilities, params: GoodSetParams = GoodSetParams()) -> float:
    """Fraction of indices whose Bhattacharyya parameter is below ``2^{-N^beta}/N``."""
    if rel.kind != "z":
        raise ValueError("good_set_fraction needs Bhattacharyya (z) reliabilities")
    return float(np.mean(rel.values < params.threshold(rel.N)))


# ---------------------------------------------------------------------------- files


def write_reliabilities(path, rel: Reliabilities, header: str = "") -> None:
    """CSV ``index,value,kind`` (0-based index); ``header`` lines are written as ``#`` comments."""
    with open(path, "w", newline="") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["index", "value", "kind"])
        for i, v in enumerate(rel.values):
            w.writerow([i, repr(float(v)), rel.kind])


def read_reliabilities(path) -> Reliabilities:
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(rows)
    vals, kinds = [], set()
    for r in reader:
        vals.append(float(r["value"]))
        kinds.add(r["kind"])
    if len(kinds) != 1:
        raise ValueError(f"{path}: expected a single reliability kind, got {sorted(kinds)}")
    return Reliabilities(np.array(vals), kinds.pop())


def read_index_file(path) -> tuple[int, ...]:
    """Indices, one per line (0-based); blank lines and ``#`` comments ignored."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#") or "=" in line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected an integer, got {line!r}") from None
    return tuple(out)
