"""Channels and gray-mapped modulation with exact per-bit LLR demapping.

Noise conventions (``sigma2`` is always the variance per real dimension):

* BPSK: real noise, ``SNR = 1 / sigma2``;
* QPSK / 16-QAM / 64-QAM: complex noise with total variance ``2 sigma2``,
  ``SNR = 1 / (2 sigma2)``.

Square QAM labels are gray coded independently per axis; a symbol's bits are
ordered I-bits first, then Q-bits, most significant (sign) bit first on each
axis. LLRs are ``ln P(b=0|y) / P(b=1|y)``, positive favouring bit 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

MODULATIONS = (2, 4, 16, 64)


def rng_stream(seed: int, *index: int) -> np.random.Generator:
    """Counter-based generator for stream ``(seed, *index)``; independent of call order."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *[int(i) for i in index]])
    return np.random.Generator(np.random.Philox(ss))


def bits_per_symbol(M: int) -> int:
    if M not in MODULATIONS:
        raise ValueError(f"unsupported modulation order {M}; choose from {MODULATIONS}")
    return int(np.log2(M))


def _gray_pam(bits_per_axis: int) -> np.ndarray:
    """Unnormalised gray PAM level for every label (label bits MSB-first)."""
    levels = np.zeros(1 << bits_per_axis)
    for label in range(1 << bits_per_axis):
        b = [(label >> (bits_per_axis - 1 - i)) & 1 for i in range(bits_per_axis)]
        # (1-2b0) * (2^(k-1) - (1-2b1) * (2^(k-2) - ... (2 - (1-2b_{k-1}))))
        amp = 1.0
        for i in range(bits_per_axis - 1, 0, -1):
            amp = (1 << (bits_per_axis - i)) - (1 - 2 * b[i]) * amp
        levels[label] = (1 - 2 * b[0]) * amp
    return levels


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy gray constellation; ``points[label]`` is the symbol for ``label``."""

    M: int
    points: np.ndarray
    labels: np.ndarray  # (M, log2 M) bit table, row = label

    @property
    def bits(self) -> int:
        return self.labels.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "I", "Q"])
            for lab, pt in zip(self.labels, self.points):
                w.writerow(["".join(map(str, lab)), repr(float(pt.real)), repr(float(pt.imag))])


@lru_cache(maxsize=None)
def constellation(M: int) -> Constellation:
    b = bits_per_symbol(M)
    labels = ((np.arange(M)[:, None] >> np.arange(b - 1, -1, -1)) & 1).astype(np.uint8)
    if M == 2:
        points = np.array([1.0 + 0j, -1.0 + 0j])
    else:
        half = b // 2
        pam = _gray_pam(half)
        i_lab = np.arange(M) >> half
        q_lab = np.arange(M) & ((1 << half) - 1)
        points = pam[i_lab] + 1j * pam[q_lab]
        points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    points.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(M, points, labels)


def modulate(bits, M: int) -> np.ndarray:
    """Map consecutive ``log2 M``-bit groups to constellation points."""
    bits = np.asarray(bits, dtype=np.int64)
    b = bits_per_symbol(M)
    if bits.shape[-1] % b:
        raise ValueError(f"bit count {bits.shape[-1]} not divisible by log2(M)={b}")
    groups = bits.reshape(bits.shape[:-1] + (-1, b))
    labels = groups @ (1 << np.arange(b - 1, -1, -1))
    return constellation(M).points[labels]


@dataclass(frozen=True)
class ChannelModel:
    """BEC(eps), AWGN or fast fading; ``sigma2`` is per real dimension."""

    kind: str
    M: int = 2
    sigma2: float = 1.0
    eps: float = 0.0

    def __post_init__(self):
        if self.kind not in ("bec", "awgn", "fading"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        bits_per_symbol(self.M)
        if self.kind == "bec":
            if not 0.0 <= self.eps <= 1.0:
                raise ValueError("erasure probability must lie in [0, 1]")
            if self.M != 2:
                raise ValueError("the BEC is only used with binary transmission")
        elif not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @classmethod
    def bec(cls, eps: float) -> "ChannelModel":
        return cls("bec", 2, 1.0, eps)

    @classmethod
    def from_snr_db(cls, kind: str, snr_db: float, M: int = 2) -> "ChannelModel":
        return cls(kind, M, snr_db_to_sigma2(snr_db, M))

    @property
    def snr_db(self) -> float:
        return sigma2_to_snr_db(self.sigma2, self.M)


def snr_db_to_sigma2(snr_db: float, M: int = 2) -> float:
    """Per-dimension noise variance: ``1/SNR`` for BPSK, ``1/(2 SNR)`` otherwise."""
    snr = 10.0 ** (snr_db / 10.0)
    return 1.0 / snr if M == 2 else 1.0 / (2.0 * snr)


def sigma2_to_snr_db(sigma2: float, M: int = 2) -> float:
    return float(10 * np.log10(1.0 / sigma2 if M == 2 else 1.0 / (2.0 * sigma2)))


def fading_coefficients(shape, M: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-power fading: complex Gaussian for QAM, Rayleigh amplitude for BPSK."""
    g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return np.abs(g).astype(complex) if M == 2 else g


def transmit(symbols, channel: ChannelModel, rng: np.random.Generator):
    """Pass symbols through the channel; returns ``(received, fading)``.

    ``fading`` is all ones on AWGN. BPSK keeps the real dimension only.
    """
    if channel.kind == "bec":
        raise ValueError("use bec_observe for the erasure channel")
    s = np.asarray(symbols, dtype=complex)
    if channel.kind == "fading":
        a = fading_coefficients(s.shape, channel.M, rng)
    else:
        a = np.ones(s.shape, dtype=complex)
    sd = np.sqrt(channel.sigma2)
    if channel.M == 2:
        noise = sd * rng.standard_normal(s.shape)
    else:
        noise = sd * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
    return a * s + noise, a


def demap_llr(received, fading, channel: ChannelModel, maxlog: bool = False) -> np.ndarray:
    """Per-bit LLRs by exact log-sum-exp over the constellation (or max-log).

    Output has ``log2 M`` values per symbol along the last axis, in label bit order.
    """
    r = np.asarray(received)
    a = np.ones(r.shape) if fading is None else np.asarray(fading)
    const = constellation(channel.M)
    s2 = channel.sigma2
    if channel.M == 2:
        # closed form of the two-point ratio
        return 2.0 * np.real(np.conj(a) * r) / s2
    d = r[..., None] - a[..., None] * const.points
    metric = -(d.real**2 + d.imag**2) / (2.0 * s2)
    out = np.empty(r.shape + (const.bits,))
    for i in range(const.bits):
        zero = const.labels[:, i] == 0
        if maxlog:
            out[..., i] = metric[..., zero].max(-1) - metric[..., ~zero].max(-1)
        else:
            out[..., i] = logsumexp(metric[..., zero], axis=-1) - logsumexp(metric[..., ~zero], axis=-1)
    return out.reshape(r.shape[:-1] + (-1,))


def bec_observe(bits, eps: float, rng: np.random.Generator):
    """Erase each bit independently with probability ``eps``.

    Returns ``(erased, llr)`` where ``llr`` is 0 at erasures and ``+-inf`` elsewhere.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("erasure probability must lie in [0, 1]")
    bits = np.asarray(bits)
    erased = rng.random(bits.shape) < eps
    llr = np.where(bits == 0, np.inf, -np.inf)
    llr[erased] = 0.0
    return erased, llr


def channel_llrs(bits, channel: ChannelModel, rng: np.random.Generator, maxlog: bool = False):
    """Modulate, transmit and demap in one step (bit count must fill whole symbols)."""
    if channel.kind == "bec":
        return bec_observe(bits, channel.eps, rng)[1]
    sym = modulate(bits, channel.M)
    r, a = transmit(sym, channel, rng)
    return demap_llr(r, a, channel, maxlog=maxlog)


def bit_mutual_information(llr, bits) -> np.ndarray:
    """Empirical per-position mutual information ``1 - E log2(1 + exp(-(1-2b) L))``."""
    llr = np.asarray(llr, dtype=float)
    sgn = 1.0 - 2.0 * np.asarray(bits, dtype=float)
    return 1.0 - np.mean(np.logaddexp(0.0, -sgn * llr), axis=0) / np.log(2.0)
