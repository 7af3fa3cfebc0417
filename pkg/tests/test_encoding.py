import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinqkff.encoding import CodeMap, EncodingError, QuditOperator, boson_operators, decompose, encode, \
    encode_bitstring_state, gray_code, identity_operator, spin1_operators
from spinqkff.pauli import PauliSum, one_norm


def test_gray_examples():
    assert gray_code(0, 2) == "00"
    assert gray_code(2, 2) == "11"
    assert gray_code(5, 3) == "111"
    with pytest.raises(EncodingError):
        gray_code(4, 2)


@given(st.integers(2, 64))
def test_codemap_gray_property(dim):
    code = CodeMap.gray(dim)
    assert code.qubits == int(np.ceil(np.log2(dim)))
    assert len(set(code.level_to_bits)) == dim
    for a, b in zip(code.level_to_bits, code.level_to_bits[1:]):
        assert sum(x != y for x, y in zip(a, b)) == 1


def test_spin1_algebra():
    sx, sy, sz = spin1_operators()
    assert np.allclose(np.diag(sz.matrix), [-1, 0, 1])
    assert np.allclose((sx @ sx + sy @ sy + sz @ sz).matrix, 2 * np.eye(3))
    assert np.allclose((sx @ sy - sy @ sx).matrix - 1j * sz.matrix, 0)
    assert all(s.is_hermitian() for s in (sx, sy, sz))


@pytest.mark.parametrize("dim", [2, 3, 4, 8])
def test_boson_operators(dim):
    b, bd, num = boson_operators(dim)
    if dim == 2:
        assert np.allclose(b.matrix, [[0, 1], [0, 0]])
    if dim == 8:
        assert np.allclose(np.diag(num.matrix), np.arange(8))
    assert np.allclose((bd @ b - num).matrix, 0)


def test_encode_examples():
    _, _, sz = spin1_operators()
    assert encode(sz) == PauliSum([(-0.5, "ZI"), (-0.5, "IZ")])
    assert encode(identity_operator(4)) == PauliSum([(1.0, "II")])
    assert one_norm(encode(boson_operators(8)[2])) == pytest.approx(3.5)


def test_bitstring_examples():
    c3 = CodeMap.gray(3)
    assert encode_bitstring_state([0], [c3]) == "00"
    assert encode_bitstring_state([2], [c3]) == "11"
    assert encode_bitstring_state([0, 2], [c3, c3]) == "0011"
    with pytest.raises(EncodingError):
        encode_bitstring_state([3], [c3])


def _random_op(seed, dim, hermitian=False):
    r = np.random.default_rng(seed)
    m = r.normal(size=(dim, dim)) + 1j * r.normal(size=(dim, dim))
    if hermitian:
        m = m + m.conj().T
    return QuditOperator(dim, m)


@given(st.integers(0, 10 ** 6), st.integers(2, 9))
def test_round_trip_and_padding(seed, dim):
    op = _random_op(seed, dim)
    code = CodeMap.gray(dim)
    m = encode(op).to_matrix()
    idx = code.used_indices
    assert np.allclose(m[np.ix_(idx, idx)], op.matrix)
    un = code.unused_indices
    assert np.allclose(m[un, :], 0) and np.allclose(m[:, un], 0)


@given(st.integers(0, 10 ** 6), st.integers(2, 8), st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_linearity(seed, dim, a, b):
    p, q = _random_op(seed, dim), _random_op(seed + 1, dim)
    lhs = encode(p * a + q * b).to_matrix()
    rhs = a * encode(p).to_matrix() + b * encode(q).to_matrix()
    assert np.allclose(lhs, rhs, atol=1e-9)


@given(st.integers(0, 10 ** 6), st.integers(2, 8))
def test_hermitian_gives_real_coefficients(seed, dim):
    h = encode(_random_op(seed, dim, hermitian=True))
    assert all(abs(c.imag) == 0 for c, _ in h.terms)


@given(st.integers(0, 10 ** 6), st.integers(2, 6))
def test_encoding_is_an_algebra_map_on_code_space(seed, dim):
    p, q = _random_op(seed, dim), _random_op(seed + 7, dim)
    assert np.allclose((encode(p) @ encode(q)).to_matrix(), encode(p @ q).to_matrix(), atol=1e-9)


def test_decompose_inverts_to_matrix(rng):
    m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    assert np.allclose(decompose(m).to_matrix(), m)
