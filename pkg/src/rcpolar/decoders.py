"""Successive cancellation decoders in the LLR domain (batched over frames).

Soft inputs are channel LLRs in codeword order, positive favouring 0. A
punctured or erased position carries LLR 0. Infinite LLRs are clipped to
``LLR_CLIP`` so that no ``inf - inf`` appears inside the tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polar_core import CodeSpec, bit_reversal_perm, crc_check, polar_transform

LLR_CLIP = 1e12


def boxplus(a, b, minsum: bool = False):
    """``2 atanh(tanh(a/2) tanh(b/2))`` in a form that is exact and overflow-free."""
    s = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    if minsum:
        return s
    return s + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))


def _natural(soft, spec: CodeSpec) -> tuple[np.ndarray, bool]:
    soft = np.asarray(soft, dtype=float)
    single = soft.ndim == 1
    if soft.shape[-1] != spec.N:
        raise ValueError(f"soft input length {soft.shape[-1]} does not match N={spec.N}")
    llr = np.clip(np.atleast_2d(soft), -LLR_CLIP, LLR_CLIP)
    return llr[:, bit_reversal_perm(spec.n)], single


@dataclass
class DecodeResult:
    """Decoder output; arrays carry a leading frame axis unless a single frame was decoded."""

    u: np.ndarray  # decoded input word
    info: np.ndarray  # bits at the info positions (payload followed by CRC)
    crc_pass: np.ndarray | None  # None when the code has no CRC
    metric: np.ndarray | None = None  # SCL path metric of the returned path
    ops: int = 0  # f/g evaluations per frame
    crc_len: int = 0

    @property
    def payload(self) -> np.ndarray:
        return self.info[..., : self.info.shape[-1] - self.crc_len]


def _finish(u, spec: CodeSpec, single: bool, metric=None, ops=0) -> DecodeResult:
    info = u[:, spec.info_idx]
    crc = crc_check(info, spec.crc_len, spec.crc_poly) if spec.crc_len else None
    if single:
        u, info = u[0], info[0]
        crc = None if crc is None else bool(crc[0])
        metric = None if metric is None else float(metric[0])
    return DecodeResult(u, info, crc, metric, ops, spec.crc_len)


class _SC:
    def __init__(self, spec: CodeSpec, minsum: bool):
        self.info = spec.info_mask
        self.minsum = minsum
        self.ops = 0
        # prefix sums for "is this subtree all frozen"
        self.cum = np.concatenate([[0], np.cumsum(self.info)])

    def all_frozen(self, lo, s):
        return self.cum[lo + s] == self.cum[lo]

    def run(self, llr):
        B, N = llr.shape
        self.u = np.zeros((B, N), dtype=np.uint8)
        self._node(llr, 0)
        return self.u

    def _node(self, L, lo):
        B, s = L.shape
        if self.all_frozen(lo, s):
            return np.zeros((B, s), dtype=np.uint8)
        if s == 1:
            bit = (L[:, 0] < 0).astype(np.uint8)
            self.u[:, lo] = bit
            return bit[:, None]
        h = s // 2
        a, b = L[:, :h], L[:, h:]
        self.ops += 2 * h
        xl = self._node(boxplus(a, b, self.minsum), lo)
        xr = self._node(b + (1.0 - 2.0 * xl) * a, lo + h)
        return np.concatenate([xl ^ xr, xr], axis=1)


def sc_decode(soft, spec: CodeSpec, minsum: bool = False) -> DecodeResult:
    """Successive cancellation decoding; a zero LLR at an info bit decides 0."""
    llr, single = _natural(soft, spec)
    dec = _SC(spec, minsum)
    u = dec.run(llr)
    return _finish(u, spec, single, ops=dec.ops)


# ---------------------------------------------------------------------------- list decoding


class _SCL:
    """List SC with eager path copying.

    The recursion keeps every per-path array on ``self.stack`` so that the
    path permutation chosen at an information leaf can be applied to all of
    them at once.
    """

    def __init__(self, spec: CodeSpec, list_size: int, minsum: bool):
        self.info = spec.info_mask
        self.P = list_size
        self.minsum = minsum
        self.cum = np.concatenate([[0], np.cumsum(self.info)])

    def run(self, llr):
        B, N = llr.shape
        P = self.P
        self.u = np.zeros((B, P, N), dtype=np.uint8)
        self.pm = np.full((B, P), np.inf)
        self.pm[:, 0] = 0.0
        self.stack = [np.repeat(llr[:, None, :], P, axis=1)]
        self._node(0)
        return self.u, self.pm

    def _permute(self, parent):
        if (parent == np.arange(self.P)).all():
            return
        rows = np.arange(parent.shape[0])[:, None]
        self.stack = [a[rows, parent] for a in self.stack]
        self.u = self.u[rows, parent]

    def _leaf(self, lo):
        L = self.stack[-1][:, :, 0]
        if not self.info[lo]:
            self.pm = self.pm + np.logaddexp(0.0, -L)
            self.stack[-1] = np.zeros(L.shape + (1,), dtype=np.uint8)
            return
        B, P = L.shape
        hard = (L < 0).astype(np.uint8)
        # candidate (path, bit) metrics, shape (B, 2P): first P are bit 0
        cand = np.concatenate([self.pm + np.logaddexp(0.0, -L), self.pm + np.logaddexp(0.0, L)], axis=1)
        bits = np.repeat(np.array([0, 1], dtype=np.uint8), P)[None, :]
        agree = bits != np.concatenate([hard, hard], axis=1)  # False sorts first
        parent_all = np.tile(np.arange(P), 2)[None, :].repeat(B, 0)
        order = np.lexsort((parent_all, agree, cand), axis=-1)[:, :P]
        new_pm = np.take_along_axis(cand, order, axis=1)
        parent = order % P
        bit = (order >= P).astype(np.uint8)
        self._permute(parent)
        self.pm = new_pm
        self.u[:, :, lo] = bit
        self.stack[-1] = bit[:, :, None]

    def _node(self, lo):
        L = self.stack[-1]
        B, P, s = L.shape
        if self.cum[lo + s] == self.cum[lo]:
            # frozen subtree: metric penalty of every forced zero, computed leaf by leaf
            self._frozen_subtree(lo, s)
            return
        if s == 1:
            self._leaf(lo)
            return
        h = s // 2
        self.stack.append(boxplus(L[..., :h], L[..., h:], self.minsum))
        self._node(lo)
        xl = self.stack.pop()
        L = self.stack[-1]
        self.stack.append(xl)
        self.stack.append(L[..., h:] + (1.0 - 2.0 * xl) * L[..., :h])
        self._node(lo + h)
        xr = self.stack.pop()
        xl = self.stack.pop()
        self.stack[-1] = np.concatenate([xl ^ xr, xr], axis=-1)

    def _frozen_subtree(self, lo, s):
        # all-zero partial sums: the left child's g input reduces to a + b
        L = self.stack[-1]
        self.pm = self.pm + _frozen_penalty(L, self.minsum)
        self.stack[-1] = np.zeros(L.shape, dtype=np.uint8)


def _frozen_penalty(L, minsum):
    """Sum of ``log(1 + exp(-l))`` over the leaf LLRs of an all-zero subtree."""
    s = L.shape[-1]
    if s == 1:
        return np.logaddexp(0.0, -L[..., 0])
    h = s // 2
    a, b = L[..., :h], L[..., h:]
    return _frozen_penalty(boxplus(a, b, minsum), minsum) + _frozen_penalty(a + b, minsum)


def scl_decode(soft, spec: CodeSpec, list_size: int = 8, use_crc: bool = True,
               minsum: bool = False) -> DecodeResult:
    """CRC-aided successive cancellation list decoding.

    The path metric is ``sum log(1 + exp(-(1 - 2 u_i) l_i))`` over all leaves,
    i.e. ``-log P(u | y)`` for the path. Ties prefer the bit that agrees with
    the leaf LLR sign (bit 0 at LLR 0), then the lower path index, so
    ``list_size=1`` reproduces ``sc_decode``.
    """
    if list_size < 1:
        raise ValueError("list_size must be >= 1")
    llr, single = _natural(soft, spec)
    dec = _SCL(spec, list_size, minsum)
    u, pm = dec.run(llr)
    B = u.shape[0]
    pick = np.argmin(pm, axis=1)  # paths are kept sorted, so this is path 0 unless inf ties
    if use_crc and spec.crc_len:
        info = u[:, :, spec.info_idx]
        ok = crc_check(info, spec.crc_len, spec.crc_poly) & np.isfinite(pm)
        masked = np.where(ok, pm, np.inf)
        any_ok = ok.any(axis=1)
        pick = np.where(any_ok, np.argmin(masked, axis=1), pick)
    rows = np.arange(B)
    return _finish(u[rows, pick], spec, single, metric=pm[rows, pick])


def scl_paths(soft, spec: CodeSpec, list_size: int = 8, minsum: bool = False):
    """All surviving paths and metrics: ``(u, pm)`` with shapes ``(B, P, N)`` and ``(B, P)``."""
    llr, _ = _natural(soft, spec)
    return _SCL(spec, list_size, minsum).run(llr)


# ---------------------------------------------------------------------------- genie


def genie_llrs(soft, spec: CodeSpec, truth, minsum: bool = False) -> np.ndarray:
    """Leaf LLRs of SC when every past decision is the true bit.

    With the past known, all partial sums come from ``truth``, so the tree is
    evaluated level by level without recursion.
    """
    llr, _ = _natural(soft, spec)
    truth = np.atleast_2d(np.asarray(truth, dtype=np.uint8))
    B, N = llr.shape
    if truth.shape != (B, N):
        truth = np.broadcast_to(truth, (B, N))
    L = llr[:, None, :]
    s = N
    while s > 1:
        h = s // 2
        g = L.shape[1]
        a, b = L[..., :h], L[..., h:]
        left_u = truth.reshape(B, g, 2, h)[:, :, 0, :]
        xl = polar_transform(left_u)
        f = boxplus(a, b, minsum)
        gg = b + (1.0 - 2.0 * xl) * a
        L = np.stack([f, gg], axis=2).reshape(B, 2 * g, h)
        s = h
    return L.reshape(B, N)


def genie_sc(soft, spec: CodeSpec, truth, rng=None, minsum: bool = False) -> np.ndarray:
    """Per-bit error flags of genie-aided SC.

    A zero leaf LLR is resolved by a fair coin from ``rng``; frozen positions
    never err.
    """
    single = np.asarray(soft).ndim == 1
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    L = genie_llrs(soft, spec, truth, minsum)
    truth = np.broadcast_to(np.atleast_2d(np.asarray(truth, dtype=np.uint8)), L.shape)
    dec = (L < 0).astype(np.uint8)
    ties = L == 0
    if ties.any():
        dec[ties] = rng.integers(0, 2, size=int(ties.sum()), dtype=np.uint8)
    flags = (dec != truth) & spec.info_mask
    return flags[0] if single else flags
