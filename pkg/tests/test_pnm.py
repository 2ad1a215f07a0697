import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from patchdct.errors import ParseError
from patchdct.pnm import format_pbm, format_ppm, parse_pbm, parse_ppm

grids = st.integers(1, 20).flatmap(lambda h: st.integers(1, 20).flatmap(
    lambda w: arrays(np.uint8, (h, w), elements=st.integers(0, 1))))


@settings(max_examples=60, deadline=None)
@given(grids, st.booleans())
def test_pbm_round_trip(mask, ascii):
    assert np.array_equal(parse_pbm(format_pbm(mask, ascii)), mask)


def test_p1_with_comments():
    data = b"P1\n# a comment\n3 2\n1 0 1\n# mid\n0 1 0\n"
    assert parse_pbm(data).tolist() == [[1, 0, 1], [0, 1, 0]]


def test_p1_packed_digits():
    assert parse_pbm(b"P1 2 2 1001").tolist() == [[1, 0], [0, 1]]


def test_p4_padding_bits():
    m = np.array([[1, 0, 1, 1, 0, 0, 0, 0, 1]], np.uint8)
    data = format_pbm(m)
    assert data == b"P4\n9 1\n" + bytes([0b10110000, 0b10000000])


@pytest.mark.parametrize("data", [b"P2\n1 1\n0", b"P1\n2 2\n1 0 1", b"P4\n9 2\n\x00", b"P1\nx 2\n", b""])
def test_pbm_malformed(data):
    with pytest.raises(ParseError):
        parse_pbm(data)


def test_ppm_round_trip():
    img = np.random.default_rng(0).integers(0, 256, (4, 5, 3)).astype(np.uint8)
    assert np.array_equal(parse_ppm(format_ppm(img)), img)
