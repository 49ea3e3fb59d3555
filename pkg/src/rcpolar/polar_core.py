"""Mother polar code: encoding, systematic encoding, frozen-set bookkeeping and CRC.

Conventions used across the package:

* indices are 0-based everywhere;
* the generator is ``B_N F^{(x)n}`` with ``F = [[1, 0], [1, 1]]``, so output
  ``j`` of the codeword is position ``bitrev(j)`` of the natural-order
  transform ``u F^{(x)n}``;
* frozen bits are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

# LTE CRC24A generator, without the leading x^24 term.
CRC24A = 0x864CFB


def bit_reversal_perm(n: int) -> np.ndarray:
    """Permutation whose entry ``i`` is ``i`` with its ``n``-bit representation reversed."""
    if n < 0:
        raise ValueError("n must be >= 0")
    N = 1 << n
    idx = np.arange(N, dtype=np.int64)
    rev = np.zeros(N, dtype=np.int64)
    for b in range(n):
        rev |= ((idx >> b) & 1) << (n - 1 - b)
    return rev


def _as_bits(bits) -> np.ndarray:
    if isinstance(bits, str):
        return bits_from_str(bits)
    arr = np.asarray(bits)
    if arr.dtype != np.uint8:
        arr = arr.astype(np.uint8)
    return arr


def polar_transform(u: np.ndarray) -> np.ndarray:
    """Natural-order transform ``u F^{(x)n}`` over GF(2) on the last axis (butterflies)."""
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    lead = x.shape[:-1]
    h = 1
    while h < N:
        # x = [x_a ^ x_b, x_b] within every block of length 2h
        v = x.reshape(*lead, N // (2 * h), 2, h)
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    return x


def encode(u, n: int) -> np.ndarray:
    """Polar encode ``u B_N F^{(x)n}``.

    Works on a single word of length ``2**n`` or on a batch with shape
    ``(..., 2**n)``. Runs in ``O(N log N)``.
    """
    u = _as_bits(u)
    N = 1 << n
    if u.shape[-1] != N:
        raise ValueError(f"input length {u.shape[-1]} does not match N={N}")
    return polar_transform(u)[..., bit_reversal_perm(n)]


@dataclass(frozen=True)
class CodeSpec:
    """One mother polar code.

    ``info_set`` holds the ``k`` non-frozen input indices (sorted). When
    ``crc_len > 0`` the last ``crc_len`` of them carry the CRC of the payload.
    """

    n: int
    info_set: tuple[int, ...]
    crc_len: int = 0
    crc_poly: int = CRC24A
    info_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        info = tuple(sorted(int(i) for i in self.info_set))
        N = 1 << self.n
        if len(set(info)) != len(info):
            raise ValueError("info_set indices must be distinct")
        if not info or info[0] < 0 or info[-1] >= N:
            raise ValueError(f"info_set must be a nonempty subset of [0, {N})")
        if not 0 <= self.crc_len < len(info):
            raise ValueError("need 0 <= crc_len < k")
        object.__setattr__(self, "info_set", info)
        mask = np.zeros(N, dtype=bool)
        mask[list(info)] = True
        mask.setflags(write=False)
        object.__setattr__(self, "info_mask", mask)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def k(self) -> int:
        return len(self.info_set)

    @property
    def payload_len(self) -> int:
        return self.k - self.crc_len

    @property
    def frozen_set(self) -> tuple[int, ...]:
        return tuple(np.flatnonzero(~self.info_mask).tolist())

    @property
    def info_idx(self) -> np.ndarray:
        return np.asarray(self.info_set, dtype=np.int64)

    @property
    def systematic_positions(self) -> np.ndarray:
        """Codeword positions holding the info bits under ``systematic_encode`` (info order)."""
        return bit_reversal_perm(self.n)[self.info_idx]

    def embed(self, info) -> np.ndarray:
        """Place ``k`` bits (batched on the last axis) into a zero-frozen input vector."""
        info = _as_bits(info)
        if info.shape[-1] != self.k:
            raise ValueError(f"expected {self.k} info bits, got {info.shape[-1]}")
        u = np.zeros(info.shape[:-1] + (self.N,), dtype=np.uint8)
        u[..., self.info_idx] = info
        return u

    def attach_crc(self, payload) -> np.ndarray:
        """Return the ``k``-bit info vector: payload followed by its CRC (if any)."""
        payload = _as_bits(payload)
        if self.crc_len == 0:
            return payload
        return crc_attach(payload, self.crc_len, self.crc_poly)


def systematic_encode(info, spec: CodeSpec) -> np.ndarray:
    """Systematic encoding by encoding twice.

    Both passes use the natural-order transform: the info bits are placed at
    the info positions and transformed, the frozen positions of the result
    are zeroed and the word is transformed again. The natural-order codeword
    then carries ``info`` verbatim at ``spec.info_set``; after the output
    bit reversal these are codeword positions ``spec.systematic_positions``.
    Raises ``ValueError`` for info sets on which the two passes do not give a
    systematic word (sets that are not closed under the polar partial order).
    """
    info = _as_bits(info)
    v = polar_transform(spec.embed(info))
    v[..., ~spec.info_mask] = 0
    z = polar_transform(v)
    if not np.array_equal(z[..., spec.info_idx], info):
        raise ValueError("two-pass systematic encoding is not systematic on this info set")
    return z[..., bit_reversal_perm(spec.n)]


def systematic_info_from_input(u_hat, spec: CodeSpec) -> np.ndarray:
    """Recover systematic info bits from a decoded input word (re-encode, read the systematic positions)."""
    return polar_transform(_as_bits(u_hat))[..., spec.info_idx]


# ---------------------------------------------------------------------------- CRC


def _crc_remainder(bits: np.ndarray, length: int, poly: int) -> np.ndarray:
    """Remainder of ``bits(x) * x^length`` modulo the generator, zero-initialised register."""
    mask = (1 << length) - 1
    top = 1 << (length - 1)
    reg = 0
    for b in bits.tolist():
        fb = ((reg & top) != 0) ^ bool(b)
        reg = (reg << 1) & mask
        if fb:
            reg ^= poly
    return np.array([(reg >> (length - 1 - i)) & 1 for i in range(length)], dtype=np.uint8)


@lru_cache(maxsize=32)
def _crc_matrix(width: int, crc_len: int, poly: int) -> np.ndarray:
    """``(width, crc_len)`` generator: the zero-init CRC is linear, so row ``i`` is the CRC of unit vector ``i``."""
    eye = np.eye(width, dtype=np.uint8)
    G = np.stack([_crc_remainder(e, crc_len, poly) for e in eye])
    G.setflags(write=False)
    return G


def _crc_of(bits: np.ndarray, crc_len: int, poly: int) -> np.ndarray:
    G = _crc_matrix(bits.shape[-1], crc_len, poly)
    return ((bits.astype(np.int64) @ G) & 1).astype(np.uint8)


def crc_attach(payload, crc_len: int = 24, poly: int = CRC24A) -> np.ndarray:
    """Append ``crc_len`` CRC bits to ``payload`` (1-D or batched on the last axis)."""
    payload = _as_bits(payload)
    if payload.shape[-1] == 0:
        raise ValueError("payload must be nonempty")
    return np.concatenate([payload, _crc_of(payload, crc_len, poly)], axis=-1)


def crc_check(word, crc_len: int = 24, poly: int = CRC24A):
    """True where the trailing ``crc_len`` bits are the CRC of the leading ones."""
    word = _as_bits(word)
    if word.shape[-1] <= crc_len:
        raise ValueError(f"word of length {word.shape[-1]} is too short for a {crc_len}-bit CRC")
    ok = np.all(_crc_of(word[..., :-crc_len], crc_len, poly) == word[..., -crc_len:], axis=-1)
    return bool(ok) if word.ndim == 1 else ok


# ---------------------------------------------------------------------------- I/O


def bits_from_str(s: str) -> np.ndarray:
    s = s.strip()
    if not s or set(s) - {"0", "1"}:
        raise ValueError(f"not a 0/1 string: {s!r}")
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def write_info_set(path, info_set) -> None:
    """One 0-based index per line, ascending."""
    Path(path).write_text("".join(f"{i}\n" for i in sorted(int(i) for i in info_set)))


def read_info_set(path) -> tuple[int, ...]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected an integer index, got {line!r}") from None
    if out != sorted(out):
        raise ValueError(f"{path}: indices must be sorted ascending")
    return tuple(out)
