import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcpolar.polar_core import (
    CRC24A,
    CodeSpec,
    bit_reversal_perm,
    bits_from_str,
    bits_to_str,
    crc_attach,
    crc_check,
    encode,
    read_info_set,
    systematic_encode,
    systematic_info_from_input,
    write_info_set,
)


def dense_generator(n):
    """B_N F^{(x)n} built by explicit Kronecker products and a permutation matrix."""
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    G = np.array([[1]], dtype=np.int64)
    for _ in range(n):
        G = np.kron(G, F)
    N = 1 << n
    B = np.zeros((N, N), dtype=np.int64)
    for i in range(N):
        rev = int(format(i, f"0{n}b")[::-1], 2) if n else 0
        B[i, rev] = 1
    return (B @ G) % 2


def serial_crc(bits, length=24, poly=CRC24A):
    reg = 0
    for b in bits:
        top = (reg >> (length - 1)) & 1
        reg = (reg << 1) & ((1 << length) - 1)
        if top ^ int(b):
            reg ^= poly
    return [(reg >> (length - 1 - i)) & 1 for i in range(length)]


@pytest.mark.parametrize("n,expected", [(1, [0, 1]), (2, [0, 2, 1, 3]), (3, [0, 4, 2, 6, 1, 5, 3, 7])])
def test_bit_reversal_small(n, expected):
    assert bit_reversal_perm(n).tolist() == expected


@pytest.mark.parametrize("n", range(0, 9))
def test_bit_reversal_is_involution(n):
    p = bit_reversal_perm(n)
    assert np.array_equal(p[p], np.arange(1 << n))


def test_encode_zero_and_last_row():
    assert not encode(np.zeros(16), 4).any()
    assert encode(np.array([0, 0, 0, 1]), 2).tolist() == [1, 1, 1, 1]


def test_encode_second_unit_vector_matches_dense_row():
    G = dense_generator(2)
    assert encode(np.array([0, 1, 0, 0]), 2).tolist() == G[1].tolist()


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_encode_matches_dense_exhaustively(n):
    G = dense_generator(n)
    N = 1 << n
    us = np.array(list(itertools.product([0, 1], repeat=N)), dtype=np.uint8) if N <= 16 else None
    if N == 16:
        us = us[:: 17]  # 3856 of the 65536 words keeps this quick
    assert np.array_equal(encode(us, n), (us.astype(np.int64) @ G) % 2)


@pytest.mark.parametrize("n", [5, 6, 8])
def test_encode_matches_dense_random(n):
    rng = np.random.default_rng(n)
    u = rng.integers(0, 2, (50, 1 << n))
    assert np.array_equal(encode(u, n), (u @ dense_generator(n)) % 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_encode_is_linear(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 2, (2, 1 << n), dtype=np.uint8)
    assert np.array_equal(encode(a ^ b, n), encode(a, n) ^ encode(b, n))


def test_encode_length_mismatch():
    with pytest.raises(ValueError):
        encode(np.zeros(5), 2)


def test_codespec_validation():
    with pytest.raises(ValueError):
        CodeSpec(2, (0, 0))
    with pytest.raises(ValueError):
        CodeSpec(2, (4,))
    with pytest.raises(ValueError):
        CodeSpec(2, ())
    with pytest.raises(ValueError):
        CodeSpec(2, (1, 2), crc_len=2)
    s = CodeSpec(3, (7, 3, 5, 6))
    assert s.info_set == (3, 5, 6, 7) and s.k == 4 and s.frozen_set == (0, 1, 2, 4)


def test_systematic_zero_info():
    spec = CodeSpec(4, (7, 11, 13, 14, 15))
    assert not systematic_encode(np.zeros(5), spec).any()


def test_systematic_positions_are_bit_reversed_info_set():
    assert CodeSpec(3, (3, 5, 6, 7)).systematic_positions.tolist() == [6, 5, 3, 7]


def test_systematic_n2_brute_force():
    spec = CodeSpec(2, (1, 3))
    info = np.array([1, 0])
    # brute force over the 4 inputs with frozen {0, 2} = 0
    sols = []
    for a, b in itertools.product([0, 1], repeat=2):
        x = encode(np.array([0, a, 0, b]), 2)
        if x[spec.systematic_positions].tolist() == info.tolist():
            sols.append(x.tolist())
    assert len(sols) == 1
    assert systematic_encode(info, spec).tolist() == sols[0] == [1, 0, 1, 0]


def test_systematic_rejects_unordered_info_set():
    # {0, 1, 3} in N=8 lacks 2: the restricted transform is not an involution
    spec = CodeSpec(3, (0, 1, 3))
    with pytest.raises(ValueError):
        systematic_encode(np.array([[0, 0, 1], [0, 1, 0], [1, 0, 0]]), spec)


@pytest.mark.parametrize("seed", range(5))
def test_systematic_places_info(seed):
    rng = np.random.default_rng(seed)
    n = 6
    # weight order of the rows of F^{(x)n}, ties to the larger index: a set closed under the partial order
    weights = np.array([bin(i).count("1") for i in range(64)])
    spec = CodeSpec(n, tuple(np.lexsort((np.arange(64), weights))[-30:]))
    info = rng.integers(0, 2, (20, spec.k))
    x = systematic_encode(info, spec)
    assert np.array_equal(x[:, spec.systematic_positions], info)
    # the codeword is a codeword of the spec: its pre-image has zero frozen bits
    u = encode(x, n)
    assert not u[:, ~spec.info_mask].any()
    assert np.array_equal(systematic_info_from_input(u, spec), info)


def test_crc_zero_payload():
    assert not crc_attach(np.zeros(40))[40:].any()


def test_crc_matches_serial_register():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rng.integers(0, 2, int(rng.integers(1, 200)))
        assert crc_attach(p)[len(p):].tolist() == serial_crc(p)


def test_crc_roundtrip_and_single_flips():
    rng = np.random.default_rng(4)
    words = crc_attach(rng.integers(0, 2, (100, 64)))
    assert crc_check(words).all()
    flip = rng.integers(0, words.shape[1], 100)
    words[np.arange(100), flip] ^= 1
    assert not crc_check(words).any()


def test_crc_short_word():
    with pytest.raises(ValueError):
        crc_check(np.zeros(24))
    with pytest.raises(ValueError):
        crc_attach(np.zeros(0))


def test_crc_configurable():
    w = crc_attach(np.array([1, 0, 1, 1]), crc_len=3, poly=0b011)
    assert w[4:].tolist() == serial_crc([1, 0, 1, 1], 3, 0b011)
    assert crc_check(w, 3, 0b011)


def test_bit_strings_and_info_file(tmp_path):
    assert bits_to_str(bits_from_str("0110")) == "0110"
    path = tmp_path / "info.txt"
    write_info_set(path, (9, 3, 4))
    assert read_info_set(path) == (3, 4, 9)
