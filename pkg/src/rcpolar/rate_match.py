"""Circular-buffer rate matching.

The codeword is written row-wise into a ``2^q x 2^p`` array (row ``i``,
column ``j`` holds ``x[i 2^p + j]``), the columns are permuted by the reversed
puncture order, and bits are read column-wise, circularly, starting at the
top of a chosen column. Reading the first ``N - m 2^q`` bits from column 0
leaves out exactly the regular puncture pattern of prefix ``m``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .puncturing import PunctureOrder


@dataclass(frozen=True)
class RateMatchConfig:
    p: int
    q: int
    L: int
    order: tuple[int, ...]
    start_column: int = 0

    def __post_init__(self):
        seq = self.order.order if isinstance(self.order, PunctureOrder) else tuple(int(i) for i in self.order)
        object.__setattr__(self, "order", seq)
        if self.p < 0 or self.q < 0:
            raise ValueError("p and q must be >= 0")
        if len(seq) != 1 << self.p or sorted(seq) != list(range(1 << self.p)):
            raise ValueError(f"order must be a permutation of range(2^p={1 << self.p})")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if not 0 <= self.start_column < 1 << self.p:
            raise ValueError("start_column out of range")

    @property
    def n(self) -> int:
        return self.p + self.q

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def rows(self) -> int:
        return 1 << self.q

    @property
    def cols(self) -> int:
        return 1 << self.p

    def with_(self, **kw) -> "RateMatchConfig":
        d = dict(p=self.p, q=self.q, L=self.L, order=self.order, start_column=self.start_column)
        d.update(kw)
        return RateMatchConfig(**d)

    @cached_property
    def column_order(self) -> np.ndarray:
        """Original base-output index held by each permuted column."""
        return np.array(self.order[::-1], dtype=np.int64)

    @cached_property
    def read_order(self) -> np.ndarray:
        """Codeword index at each column-wise read position of the permuted array (length N)."""
        rows = np.arange(self.rows, dtype=np.int64)
        return (rows[None, :] * self.cols + self.column_order[:, None]).ravel()

    @cached_property
    def positions(self) -> np.ndarray:
        """Codeword index of each of the ``L`` transmitted bits, in transmission order."""
        start = self.start_column * self.rows
        return self.read_order[(start + np.arange(self.L)) % self.N]


@dataclass(frozen=True)
class CircularBuffer:
    """Column-permuted ``2^q x 2^p`` arrangement of a codeword."""

    array: np.ndarray
    column_order: np.ndarray

    def read(self, L: int, start_column: int = 0) -> np.ndarray:
        flat = self.array.T.reshape(-1)
        rows = self.array.shape[0]
        return flat[(start_column * rows + np.arange(L)) % flat.size]


def build_buffer(x, config: RateMatchConfig) -> CircularBuffer:
    x = np.asarray(x)
    if x.shape[-1] != config.N:
        raise ValueError(f"codeword length {x.shape[-1]} does not match N={config.N}")
    arr = x.reshape(config.rows, config.cols)[:, config.column_order]
    return CircularBuffer(arr, config.column_order)


def select_bits(x, config: RateMatchConfig) -> np.ndarray:
    """Transmitted bits for ``config`` (batched on the last axis)."""
    x = np.asarray(x)
    if x.shape[-1] != config.N:
        raise ValueError(f"codeword length {x.shape[-1]} does not match N={config.N}")
    return x[..., config.positions]


def derate_match(llrs, config: RateMatchConfig, out: np.ndarray | None = None) -> np.ndarray:
    """Accumulate received LLRs into a length-N soft buffer (repeated bits add up).

    Positions never transmitted stay 0. ``out`` (if given) is added into in place.
    """
    llrs = np.asarray(llrs, dtype=float)
    if llrs.shape[-1] != config.L:
        raise ValueError(f"expected {config.L} LLRs, got {llrs.shape[-1]}")
    if out is None:
        out = np.zeros(llrs.shape[:-1] + (config.N,))
    pos = config.positions
    # consecutive runs of at most N reads touch distinct positions
    for s in range(0, config.L, config.N):
        out[..., pos[s:s + config.N]] += llrs[..., s:s + config.N]
    return out


def repetition_counts(config: RateMatchConfig) -> np.ndarray:
    return np.bincount(config.positions, minlength=config.N)


def dump_column_order(path, config: RateMatchConfig) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["column", "base_index"])
        for c, j in enumerate(config.column_order):
            w.writerow([c, int(j)])
