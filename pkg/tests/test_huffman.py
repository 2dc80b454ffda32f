import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lossycorr.codecs import huffman
from lossycorr.codecs.base import (FLAG_DEFLATE, join_sections, pack_stage, split_sections,
                                   unpack_stage)
from lossycorr.exceptions import IntegrityError


def round_trip(symbols):
    data = huffman.encode(symbols)
    out, end = huffman.decode(data)
    assert end == len(data)
    np.testing.assert_array_equal(out, np.asarray(symbols, dtype=np.int64).ravel())
    return data


@settings(max_examples=60, deadline=None)
@given(arrays(np.int64, st.integers(0, 400),
              elements=st.integers(-2 ** 62, 2 ** 62)))
def test_round_trip_property(symbols):
    round_trip(symbols)


@settings(max_examples=30, deadline=None)
@given(arrays(np.int64, st.integers(1, 2000), elements=st.integers(-3, 3)))
def test_round_trip_small_alphabet(symbols):
    round_trip(symbols)


def test_empty_and_single_symbol():
    round_trip(np.array([], dtype=np.int64))
    data = round_trip(np.zeros(10000, dtype=np.int64))
    # one bit per symbol
    assert len(data) < 10000 // 8 + 64


def test_escape_path():
    rng = np.random.default_rng(0)
    symbols = np.concatenate([np.arange(70000), rng.integers(0, 50, 100000)])
    rng.shuffle(symbols)
    round_trip(symbols)


def test_length_cap_with_fibonacci_frequencies():
    fib = [1, 1]
    while len(fib) < 40:
        fib.append(fib[-1] + fib[-2])
    lengths = huffman.code_lengths(fib)
    assert lengths.max() <= huffman.MAX_CODE_LENGTH
    assert np.sum(2.0 ** -lengths) <= 1.0
    symbols = np.repeat(np.arange(25), fib[:25])
    round_trip(symbols)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 10 ** 6), min_size=2, max_size=60))
def test_canonical_codes_prefix_free(freqs):
    lengths = huffman.code_lengths(freqs)
    assert np.sum(2.0 ** -lengths) == pytest.approx(1.0)
    codes = huffman.canonical_codes(lengths)
    words = [format(int(c), f"0{int(l)}b") for c, l in zip(codes, lengths)]
    for i, a in enumerate(words):
        for j, b in enumerate(words):
            if i != j:
                assert not b.startswith(a)


def test_truncated_stream():
    data = huffman.encode(np.arange(100) % 7)
    with pytest.raises(IntegrityError):
        huffman.decode(data[:-5])
    with pytest.raises(IntegrityError):
        huffman.decode(data[:10])


@settings(max_examples=40, deadline=None)
@given(st.binary(max_size=3000), st.integers(0, 2))
def test_byte_stage_round_trip(body, flags):
    flags &= ~FLAG_DEFLATE
    payload = pack_stage(body, flags=flags)
    got_flags, got = unpack_stage(payload)
    assert got == body
    assert got_flags & ~FLAG_DEFLATE == flags
    assert len(payload) <= len(body) + 1


def test_byte_stage_compresses_redundant_data():
    payload = pack_stage(b"\0" * 10000)
    assert payload[0] & FLAG_DEFLATE
    assert len(payload) < 100


@settings(max_examples=30, deadline=None)
@given(st.lists(st.binary(max_size=50), max_size=8))
def test_sections_round_trip(parts):
    assert split_sections(join_sections(*parts), len(parts)) == parts
