import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdcsim.graycode import (GrayValue, bin_to_gray, decode_table, exhaustive_check, gray_empty, gray_full,
                             gray_to_bin, pointer_width)


def test_known_codes():
    assert [bin_to_gray(x, 3).bits for x in range(8)] == [0, 1, 3, 2, 6, 7, 5, 4]
    assert gray_to_bin(GrayValue(0b100, 3)) == 7


def test_pointer_width():
    assert pointer_width(8) == 4
    assert pointer_width(2) == 2
    with pytest.raises(Exception):
        pointer_width(6)


@given(width=st.integers(2, 40), data=st.data())
def test_roundtrip_and_single_bit_step(width, data):
    x = data.draw(st.integers(0, (1 << width) - 1))
    g = bin_to_gray(x, width)
    assert gray_to_bin(g) == x
    nxt = bin_to_gray((x + 1) % (1 << width), width)
    assert bin(g.bits ^ nxt.bits).count("1") == 1


@given(width=st.integers(2, 24), data=st.data())
def test_flags_match_binary_shadow(width, data):
    size = 1 << width
    depth = size // 2
    r = data.draw(st.integers(0, size - 1))
    occ = data.draw(st.integers(0, depth))
    w = (r + occ) % size
    gw, gr = bin_to_gray(w, width), bin_to_gray(r, width)
    assert gray_full(gw, gr) == (occ == depth)
    assert gray_empty(gr, gw) == (occ == 0)


@pytest.mark.parametrize("width", range(2, 9))
def test_full_empty_against_binary_all_pairs(width):
    """Independent brute force: binary pointer difference as the oracle."""
    size = 1 << width
    depth = size // 2
    for w in range(size):
        for r in range(size):
            occ = (w - r) % size
            gw, gr = bin_to_gray(w, width), bin_to_gray(r, width)
            assert gray_full(gw, gr) == (occ == depth)
            assert gray_empty(gr, gw) == (w == r)


def test_decode_table_inverts_encode():
    t = decode_table(6)
    assert all(t[bin_to_gray(x, 6).bits] == x for x in range(64))


@pytest.mark.parametrize("width", [2, 5, 9, 12])
def test_exhaustive_check(width):
    c = exhaustive_check(width)
    assert c.ok and c.codes == 1 << width
    assert c.pairs_checked == (1 << (2 * width) if width <= 9 else 0)
