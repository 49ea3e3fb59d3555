"""Hybrid ARQ with Chase combining (CC) or incremental redundancy (IR).

Every transmission of a session sends ``L`` bits of the circular buffer. CC
always starts at column 0; IR transmission ``r`` (1-based) starts at column
``(r-1) 2^p / t``. Received LLRs are accumulated in a length-``N`` soft
buffer, a decode is attempted after every round and the session ends at the
first success or after ``t`` rounds.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bicm import ColumnAssignment, assign_columns, harq_shift, harq_shift_columns
from .rate_match import RateMatchConfig, derate_match

SCHEMES = ("cc", "ir")


@dataclass(frozen=True)
class HarqSession:
    """State of one session (or of a batch of sessions sharing a configuration).

    ``buffer`` has shape ``(N,)`` or ``(B, N)``; ``r`` counts completed
    transmissions; ``success_round`` is 0 while undecided.
    """

    scheme: str
    t: int
    config: RateMatchConfig
    M: int = 2
    layout: str = "descending"
    buffer: np.ndarray | None = field(default=None, repr=False)
    r: int = 0
    success_round: np.ndarray | int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if not 0 <= self.r <= self.t:
            raise ValueError("round counter outside [0, t]")
        if self.buffer is None:
            object.__setattr__(self, "buffer", np.zeros(self.config.N))

    @property
    def base_assignment(self) -> ColumnAssignment:
        return assign_columns(self.config.L, self.config.with_(start_column=0), self.M, self.layout)

    @property
    def exhausted(self) -> bool:
        return self.r >= self.t

    @property
    def done(self):
        return np.asarray(self.success_round) > 0


def start_column(scheme: str, r: int, t: int, p: int) -> int:
    """0-based start column of transmission ``r`` (1-based)."""
    if scheme == "cc":
        return 0
    return harq_shift_columns(r, t, p)


def next_redundancy(session: HarqSession) -> tuple[int, ColumnAssignment]:
    """Start column and BICM assignment of the next transmission."""
    if session.exhausted:
        raise RuntimeError(f"session exhausted after {session.t} transmissions")
    r = session.r + 1
    base = session.base_assignment
    if session.scheme == "cc":
        return 0, base
    return start_column("ir", r, session.t, session.config.p), harq_shift(base, r, session.t, session.config.p)


def round_config(session: HarqSession) -> RateMatchConfig:
    start, _ = next_redundancy(session)
    return session.config.with_(start_column=start)


def combine(session: HarqSession, llrs, decode: Callable[[np.ndarray], np.ndarray] | None = None) -> HarqSession:
    """Add one round of received LLRs (transmission order) into the soft buffer.

    ``decode`` maps the accumulated buffer to a success flag (per session);
    sessions that succeed record the round.
    """
    cfg = round_config(session)
    llrs = np.asarray(llrs, dtype=float)
    if llrs.shape[-1] != cfg.L:
        raise ValueError(f"round carries {llrs.shape[-1]} LLRs, configuration expects {cfg.L}")
    buf = derate_match(llrs, cfg, out=np.array(session.buffer, dtype=float, copy=True))
    r = session.r + 1
    success = session.success_round
    if decode is not None:
        ok = np.asarray(decode(buf), dtype=bool)
        success = np.where((np.asarray(success) == 0) & ok, r, success)
        if success.ndim == 0:
            success = int(success)
    return dataclasses.replace(session, buffer=buf, r=r, success_round=success)


def throughput(R: float, M: int, bler: float, t_bar: float) -> float:
    """Normalised throughput ``R log2(M) (1 - BLER) / t_bar``."""
    if not 0.0 <= bler <= 1.0:
        raise ValueError("bler must lie in [0, 1]")
    if t_bar < 1.0:
        raise ValueError("t_bar must be >= 1")
    return R * np.log2(M) * (1.0 - bler) / t_bar


@dataclass
class HarqCounts:
    """Order-independent counters over simulated sessions."""

    sessions: int = 0
    transmissions: int = 0
    failures: int = 0

    def __iadd__(self, other: "HarqCounts"):
        self.sessions += other.sessions
        self.transmissions += other.transmissions
        self.failures += other.failures
        return self

    @property
    def t_bar(self) -> float:
        return self.transmissions / self.sessions if self.sessions else float("nan")

    @property
    def residual_bler(self) -> float:
        return self.failures / self.sessions if self.sessions else float("nan")

    def throughput(self, R: float, M: int) -> float:
        return throughput(R, M, self.residual_bler, self.t_bar)
