"""Bit mapping from the circular buffer onto BICM subchannels.

Gray ``M``-QAM behaves as ``log2(M)/2`` binary subchannels of different
reliability (one per bit level of each axis). Transmitted bits are labelled
in read order: with the default ``"descending"`` layout the first group of
columns goes to the most reliable subchannel, the next group to the second,
and so on; groups are equal up to a fractional remainder, so a column may be
split between two labels (or between a label and puncturing).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channels import bits_per_symbol
from .rate_match import RateMatchConfig

PUNCTURED = -1


def n_classes(M: int) -> int:
    """Number of reliability classes: 1 for BPSK/QPSK, log2(M)/2 for square QAM."""
    return max(1, bits_per_symbol(M) // 2)


def class_positions(M: int) -> list[tuple[int, ...]]:
    """Symbol bit positions of each class, most reliable class first.

    Bits are I-axis then Q-axis, MSB first, so class ``c`` is bit level ``c``
    on both axes.
    """
    b = bits_per_symbol(M)
    if M == 2:
        return [(0,)]
    if M == 4:
        return [(0, 1)]
    half = b // 2
    return [(c, half + c) for c in range(half)]


@dataclass(frozen=True)
class ColumnAssignment:
    """Per-transmitted-bit subchannel labels plus their column/row segments.

    ``labels[t]`` is the class of the ``t``-th transmitted bit. ``segments``
    lists ``(column, row_start, row_stop, label)`` runs in read order, ending
    with ``PUNCTURED`` runs for buffer positions not transmitted.
    """

    M: int
    rows: int
    cols: int
    start_column: int
    labels: np.ndarray = field(repr=False)

    @property
    def L(self) -> int:
        return self.labels.size

    @cached_property
    def segments(self) -> list[tuple[int, int, int, int]]:
        N = self.rows * self.cols
        total = max(self.L, N) if self.L >= N else N
        lab = np.full(total, PUNCTURED, dtype=np.int64)
        lab[: self.L] = self.labels
        out = []
        t = 0
        while t < total:
            col_rel, row = divmod(t, self.rows)
            col = (self.start_column + col_rel) % self.cols
            stop = t
            limit = t - row + self.rows
            while stop < min(limit, total) and lab[stop] == lab[t]:
                stop += 1
            out.append((col, row, row + stop - t, int(lab[t])))
            t = stop
        return out

    def column_labels(self) -> dict[int, list[tuple[int, int, int]]]:
        """Column -> list of ``(row_start, row_stop, label)`` for the first pass over the buffer."""
        out: dict[int, list[tuple[int, int, int]]] = {}
        seen = 0
        for col, r0, r1, lab in self.segments:
            if seen >= self.rows * self.cols:
                break
            out.setdefault(col, []).append((r0, r1, lab))
            seen += r1 - r0
        return out

    @cached_property
    def symbol_slots(self) -> np.ndarray:
        """Transmitted-bit index carried by each symbol bit slot (``-1`` for padding)."""
        b = bits_per_symbol(self.M)
        pos = class_positions(self.M)
        per = len(pos[0])
        streams = [np.flatnonzero(self.labels == c) for c in range(len(pos))]
        S = max(math.ceil(s.size / per) for s in streams) if self.L else 0
        slots = np.full((S, b), -1, dtype=np.int64)
        for c, stream in enumerate(streams):
            padded = np.full(S * per, -1, dtype=np.int64)
            padded[: stream.size] = stream
            slots[:, list(pos[c])] = padded.reshape(S, per)
        return slots.ravel()

    @property
    def num_symbols(self) -> int:
        return self.symbol_slots.size // bits_per_symbol(self.M)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["column", "row_start", "row_stop", "label"])
            for seg in self.segments:
                w.writerow(seg)


def assign_columns(L: int, config: RateMatchConfig, M: int, layout: str = "descending") -> ColumnAssignment:
    """Label the ``L`` transmitted bits of ``config`` with BICM classes."""
    ncls = n_classes(M)
    t = np.arange(L)
    if layout == "descending":
        per_sym = bits_per_symbol(M)
        S = math.ceil(L / per_sym)
        group = (per_sym // ncls) * S
        labels = t // group
    elif layout == "alternating":
        labels = (t // config.rows) % ncls
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return ColumnAssignment(M, config.rows, config.cols, config.start_column, labels.astype(np.int64))


def harq_shift_columns(r: int, t: int, p: int) -> int:
    """Start column of transmission ``r`` (1-based): ``(r-1) 2^p / t``, rounded when inexact."""
    if r < 1 or t < 1:
        raise ValueError("r and t must be >= 1")
    return int(round((r - 1) * (1 << p) / t)) % (1 << p)


def harq_shift(assignment: ColumnAssignment, r: int, t: int, p: int) -> ColumnAssignment:
    """Rotate an assignment by ``(r-1) 2^p / t`` columns."""
    s = harq_shift_columns(r, t, p)
    return ColumnAssignment(assignment.M, assignment.rows, assignment.cols,
                            (assignment.start_column + s) % assignment.cols, assignment.labels)


def interleave_to_symbols(tx_bits, assignment: ColumnAssignment) -> np.ndarray:
    """Symbol-ordered bit sequence (``num_symbols * log2 M``, zero padded) ready for ``modulate``."""
    tx_bits = np.asarray(tx_bits)
    if tx_bits.shape[-1] != assignment.L:
        raise ValueError(f"expected {assignment.L} bits, got {tx_bits.shape[-1]}")
    slots = assignment.symbol_slots
    out = np.zeros(tx_bits.shape[:-1] + (slots.size,), dtype=tx_bits.dtype)
    valid = slots >= 0
    out[..., valid] = tx_bits[..., slots[valid]]
    return out


def deinterleave_llrs(sym_llrs, assignment: ColumnAssignment) -> np.ndarray:
    """Inverse of ``interleave_to_symbols`` for soft values; padding slots are dropped."""
    sym_llrs = np.asarray(sym_llrs)
    slots = assignment.symbol_slots
    if sym_llrs.shape[-1] != slots.size:
        raise ValueError(f"expected {slots.size} values, got {sym_llrs.shape[-1]}")
    out = np.zeros(sym_llrs.shape[:-1] + (assignment.L,), dtype=sym_llrs.dtype)
    valid = slots >= 0
    out[..., slots[valid]] = sym_llrs[..., valid]
    return out
