"""Progressive puncturing on a short base code and its regular extension.

The progressive puncturing algorithm (PPA) grows a puncture set one output at
a time, each time picking the output whose removal yields the smallest union
bound on the block error rate for a fixed information set. The resulting
order is nested by construction, so every prefix is a valid puncture pattern
of a rate-compatible family.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .construction import (
    bec_z_batch,
    bit_error_prob,
    design_llr_mean,
    ga_construct,
    bec_bit_channels,
    ga_llr_means,
    select_info_set,
)

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Criterion:
    """Union-bound design criterion: ``kind`` is ``"ga"`` (design SNR in dB) or ``"bec"`` (eps)."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("ga", "bec"):
            raise ValueError(f"unknown criterion {self.kind!r}")

    @classmethod
    def ga(cls, design_snr_db: float) -> "Criterion":
        return cls("ga", float(design_snr_db))

    @classmethod
    def bec(cls, eps: float) -> "Criterion":
        return cls("bec", float(eps))

    def reliabilities(self, n: int, punct=()):
        if self.kind == "ga":
            return ga_construct(n, self.value, punct)
        return bec_bit_channels(n, self.value, punct)

    def error_probs(self, masks: np.ndarray) -> np.ndarray:
        """Bit error probabilities for a batch of output puncture masks ``(B, N)``."""
        n = masks.shape[-1].bit_length() - 1
        if self.kind == "ga":
            out = np.where(masks, 0.0, design_llr_mean(self.value))
            return bit_error_prob(ga_llr_means(out))
        return bec_z_batch(n, self.value, masks) / 2.0


def union_bounds(criterion: Criterion, info_set, masks: np.ndarray) -> np.ndarray:
    """Union bound of ``info_set`` for each puncture mask in the batch."""
    pe = criterion.error_probs(np.atleast_2d(masks))
    return pe[:, list(info_set)].sum(axis=1)


@dataclass(frozen=True)
class PunctureOrder:
    """A permutation of base-code outputs; ``order[:m]`` is the puncture set for ``m``.

    ``scores[m]`` holds the union bound of every candidate examined at step
    ``m`` (NaN for outputs already punctured), kept for audit.
    """

    order: tuple[int, ...]
    base_n: int
    meta: dict = field(default_factory=dict)
    scores: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if sorted(self.order) != list(range(1 << self.base_n)):
            raise ValueError("order must be a permutation of the base-code outputs")
        if not self.meta:
            raise ValueError("puncture order metadata must be non-empty")

    def prefix(self, m: int) -> frozenset[int]:
        if not 0 <= m <= len(self.order):
            raise ValueError(f"m={m} outside [0, {len(self.order)}]")
        return frozenset(self.order[:m])

    def bound_at(self, m: int) -> float:
        """Union bound of the m-prefix (from the stored step scores)."""
        if m == 0 or self.scores is None:
            raise ValueError("bound is only recorded for m >= 1 after a PPA run")
        return float(self.scores[m - 1, self.order[m - 1]])

    def tie_report(self, rtol: float = 1e-6) -> list[tuple[int, list[int]]]:
        """Steps at which several candidates scored within ``rtol`` of the chosen one."""
        out = []
        if self.scores is None:
            return out
        for m, row in enumerate(self.scores):
            best = row[self.order[m]]
            close = [int(c) for c in np.flatnonzero(np.abs(row - best) <= rtol * abs(best))]
            if len(close) > 1:
                out.append((m, close))
        return out


def _argmin_with_ties(scores: np.ndarray, rtol: float = TIE_RTOL) -> int:
    """Lowest index among the values within ``rtol`` of the minimum (NaNs ignored)."""
    best = np.nanmin(scores)
    close = np.flatnonzero(scores <= best + rtol * abs(best))
    return int(close[0])


def ppa(n: int, info_set, criterion: Criterion) -> PunctureOrder:
    """Progressive puncturing order for the base code of length ``2**n``.

    Tests the criterion ``N(N+1)/2`` times in total; ties within a relative
    ``1e-12`` go to the lowest output index.
    """
    N = 1 << n
    info_set = tuple(sorted(info_set))
    punct = np.zeros(N, dtype=bool)
    order: list[int] = []
    all_scores = np.full((N, N), np.nan)
    for m in range(N):
        cand = np.flatnonzero(~punct)
        masks = np.repeat(punct[None, :], cand.size, axis=0)
        masks[np.arange(cand.size), cand] = True
        try:
            bounds = union_bounds(criterion, info_set, masks)
        except Exception as exc:  # noqa: BLE001 - surfaced with step context
            raise RuntimeError(f"criterion evaluation failed at step {m}") from exc
        all_scores[m, cand] = bounds
        choice = _argmin_with_ties(all_scores[m])
        order.append(choice)
        punct[choice] = True
    meta = {
        "base_n": n,
        "criterion": criterion.kind.upper(),
        ("design_snr_db" if criterion.kind == "ga" else "eps"): criterion.value,
        "info_set": ",".join(map(str, info_set)),
    }
    return PunctureOrder(tuple(order), n, meta, all_scores)


def ppa_for_rate(n: int, k: int, criterion: Criterion, m_design: int = 0) -> PunctureOrder:
    """PPA with the info set chosen from the criterion's reliabilities.

    ``m_design`` > 0 selects the info set on the code punctured by the first
    ``m_design`` entries of an initial run, i.e. at the highest rate of interest.
    """
    info = select_info_set(criterion.reliabilities(n), k)
    if m_design:
        first = ppa(n, info, criterion)
        info = select_info_set(criterion.reliabilities(n, first.prefix(m_design)), k)
    return ppa(n, info, criterion)


def exhaustive_search(n: int, info_set, criterion: Criterion, m: int, cap: int = 2_000_000,
                      batch: int = 8192) -> tuple[frozenset[int], float]:
    """Globally optimal ``m``-subset of outputs under the union bound (validation oracle)."""
    N = 1 << n
    if not 0 <= m <= N:
        raise ValueError(f"m={m} outside [0, {N}]")
    total = math.comb(N, m)
    if total > cap:
        raise ValueError(f"C({N},{m}) = {total} patterns exceeds the cap of {cap}")
    best, best_val = None, np.inf
    combos = itertools.combinations(range(N), m)
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        idx = np.array(chunk, dtype=np.int64).reshape(len(chunk), m)
        masks = np.zeros((len(chunk), N), dtype=bool)
        np.put_along_axis(masks, idx, True, axis=1)
        vals = union_bounds(criterion, info_set, masks)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best = float(vals[i]), frozenset(chunk[i])
    return best, best_val


def expand_regular(order, m: int, n: int) -> frozenset[int]:
    """Regular mother-code pattern ``{i : i mod 2^p in order[:m]}``, size ``m 2^(n-p)``."""
    seq = order.order if isinstance(order, PunctureOrder) else tuple(order)
    P = len(seq)
    p = P.bit_length() - 1
    if p > n:
        raise ValueError("base code longer than the mother code")
    if not 0 <= m <= P:
        raise ValueError(f"m={m} outside [0, {P}]")
    base = np.array(seq[:m], dtype=np.int64)
    rows = np.arange(1 << (n - p), dtype=np.int64)[:, None] << p
    return frozenset((rows + base[None, :]).ravel().tolist())


# ---------------------------------------------------------------------------- file format


def write_order(path, order: PunctureOrder, extra_header: str = "") -> None:
    """Header ``key=value`` lines, then one 0-based output index per line in puncture order."""
    lines = [f"# {ln}" for ln in extra_header.splitlines()]
    lines += ["# 0-based output indices, first line punctured first"]
    lines += [f"{k}={v}" for k, v in order.meta.items()]
    lines += [str(i) for i in order.order]
    Path(path).write_text("\n".join(lines) + "\n")


def read_order(path) -> PunctureOrder:
    meta, seq = {}, []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, val = line.partition("=")
            meta[key.strip()] = val.strip()
            continue
        try:
            seq.append(int(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected an index, got {line!r}") from None
    if "base_n" not in meta:
        raise ValueError(f"{path}: missing base_n header")
    base_n = int(meta["base_n"])
    if len(seq) != 1 << base_n:
        raise ValueError(f"{path}: expected {1 << base_n} indices, found {len(seq)}")
    return PunctureOrder(tuple(seq), base_n, meta)
