"""Canonical Huffman coding of integer symbol streams.

The alphabet is whatever integers occur in the stream. When more than
``MAX_ALPHABET - 1`` distinct values occur, the rarest ones share an escape
code and are stored verbatim as int64 after the bitstream. Code lengths are
capped at ``MAX_CODE_LENGTH`` by repeatedly flattening the frequencies.

Stream layout (little-endian)::

    u64 n_symbols | u32 alphabet_size | u32 n_escaped | u8 has_escape
    i64[alphabet_size - has_escape] alphabet values (ascending)
    u8[alphabet_size] code lengths (escape last)
    i64[n_escaped] escaped values
    u64 n_bits | packed bits (MSB first)
"""

import heapq
import struct

import numpy as np

from ..exceptions import IntegrityError

MAX_CODE_LENGTH = 20
MAX_ALPHABET = 1 << 16
_HEADER = struct.Struct("<QIIB")


def code_lengths(freqs):
    """Huffman code lengths for positive frequencies (deterministic ties)."""
    freqs = [int(f) for f in freqs]
    n = len(freqs)
    if n == 1:
        return np.ones(1, dtype=np.int64)
    while True:
        heap = [(f, i) for i, f in enumerate(freqs)]
        heapq.heapify(heap)
        children = []
        next_id = n
        while len(heap) > 1:
            f1, a = heapq.heappop(heap)
            f2, b = heapq.heappop(heap)
            children.append((a, b))
            heapq.heappush(heap, (f1 + f2, next_id))
            next_id += 1
        depth = [0] * (2 * n - 1)
        for node in range(2 * n - 2, n - 1, -1):
            a, b = children[node - n]
            depth[a] = depth[b] = depth[node] + 1
        lengths = np.array(depth[:n], dtype=np.int64)
        if lengths.max() <= MAX_CODE_LENGTH:
            return lengths
        freqs = [(f + 1) // 2 for f in freqs]


def canonical_codes(lengths):
    """Canonical code values ordered by (length, alphabet index)."""
    lengths = np.asarray(lengths, dtype=np.int64)
    order = np.lexsort((np.arange(len(lengths)), lengths))
    codes = np.zeros(len(lengths), dtype=np.int64)
    code = 0
    prev = int(lengths[order[0]]) if len(order) else 0
    for rank, idx in enumerate(order.tolist()):
        length = int(lengths[idx])
        if rank:
            code = (code + 1) << (length - prev)
        codes[idx] = code
        prev = length
    return codes


def encode(symbols) -> bytes:
    symbols = np.ascontiguousarray(symbols, dtype=np.int64).ravel()
    n = len(symbols)
    if n == 0:
        return _HEADER.pack(0, 0, 0, 0) + struct.pack("<Q", 0)
    values, inverse, counts = np.unique(symbols, return_inverse=True, return_counts=True)
    has_escape = len(values) > MAX_ALPHABET - 1
    if has_escape:
        # keep the most frequent values, ties broken by value
        rank = np.lexsort((values, -counts))
        keep = np.sort(rank[:MAX_ALPHABET - 1])
        remap = np.full(len(values), len(keep), dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        idx = remap[inverse]
        escaped = symbols[idx == len(keep)]
        alphabet = values[keep]
        freqs = np.append(counts[keep], len(escaped))
    else:
        idx = inverse.astype(np.int64)
        escaped = np.empty(0, dtype=np.int64)
        alphabet = values
        freqs = counts
    lengths = code_lengths(freqs)
    codes = canonical_codes(lengths)

    sym_len = lengths[idx]
    sym_code = codes[idx]
    n_bits = int(sym_len.sum())
    owner = np.repeat(np.arange(n), sym_len)
    starts = np.cumsum(sym_len) - sym_len
    k = np.arange(n_bits) - starts[owner]
    bits = (sym_code[owner] >> (sym_len[owner] - 1 - k)) & 1
    packed = np.packbits(bits.astype(np.uint8))

    parts = [
        _HEADER.pack(n, len(freqs), len(escaped), int(has_escape)),
        alphabet.astype("<i8").tobytes(),
        lengths.astype(np.uint8).tobytes(),
        escaped.astype("<i8").tobytes(),
        struct.pack("<Q", n_bits),
        packed.tobytes(),
    ]
    return b"".join(parts)


def decode(data: bytes, offset=0):
    """Decode a stream produced by :func:`encode`.

    Returns ``(symbols, end_offset)``.
    """
    mv = memoryview(data)
    try:
        n, alpha_size, n_escaped, has_escape = _HEADER.unpack_from(mv, offset)
        pos = offset + _HEADER.size
        n_values = alpha_size - has_escape
        alphabet = np.frombuffer(mv, dtype="<i8", count=n_values, offset=pos).astype(np.int64)
        pos += 8 * n_values
        lengths = np.frombuffer(mv, dtype=np.uint8, count=alpha_size, offset=pos).astype(np.int64)
        pos += alpha_size
        escaped = np.frombuffer(mv, dtype="<i8", count=n_escaped, offset=pos).astype(np.int64)
        pos += 8 * n_escaped
        (n_bits,) = struct.unpack_from("<Q", mv, pos)
        pos += 8
        n_bytes = (n_bits + 7) // 8
        if pos + n_bytes > len(data):
            raise IntegrityError("huffman stream truncated")
        packed = np.frombuffer(mv, dtype=np.uint8, count=n_bytes, offset=pos)
        pos += n_bytes
    except (struct.error, ValueError) as exc:
        raise IntegrityError(f"corrupt huffman stream: {exc}") from exc
    if n == 0:
        return np.empty(0, dtype=np.int64), pos
    if alpha_size == 0 or lengths.min() < 1 or lengths.max() > MAX_CODE_LENGTH:
        raise IntegrityError("corrupt huffman code lengths")

    max_len = int(lengths.max())
    codes = canonical_codes(lengths)
    # table indexed by the next max_len bits of the stream
    span = 1 << (max_len - lengths)
    if int(span.sum()) > (1 << max_len):
        raise IntegrityError("huffman code lengths violate the Kraft inequality")
    sym_table = np.full(1 << max_len, -1, dtype=np.int64)
    len_table = np.zeros(1 << max_len, dtype=np.int64)
    for s, (c, l) in enumerate(zip(codes.tolist(), lengths.tolist())):
        lo = c << (max_len - l)
        sym_table[lo:lo + (1 << (max_len - l))] = s
        len_table[lo:lo + (1 << (max_len - l))] = l

    buf = np.concatenate([packed, np.zeros(4, dtype=np.uint8)]).astype(np.uint64)
    word = (buf[:-3] << 24) | (buf[1:-2] << 16) | (buf[2:-1] << 8) | buf[3:]
    mask = np.uint64((1 << max_len) - 1)

    positions = np.empty(n, dtype=np.int64)
    count = 0
    p = 0
    chunk = 1 << 20
    while count < n:
        base = p
        stop = min(base + chunk, n_bits)
        if base >= stop:
            raise IntegrityError("huffman stream ended early")
        bitpos = np.arange(base, stop, dtype=np.uint64)
        shift = np.uint64(32 - max_len) - (bitpos & np.uint64(7))
        win = (word[(bitpos >> np.uint64(3)).astype(np.int64)] >> shift) & mask
        step = len_table[win.astype(np.int64)].tolist()
        while p < stop and count < n:
            positions[count] = p
            count += 1
            p += step[p - base]
    if p > n_bits:
        raise IntegrityError("huffman stream overruns its bit count")

    bitpos = positions.astype(np.uint64)
    shift = np.uint64(32 - max_len) - (bitpos & np.uint64(7))
    win = (word[(bitpos >> np.uint64(3)).astype(np.int64)] >> shift) & mask
    idx = sym_table[win.astype(np.int64)]
    if (idx < 0).any():
        raise IntegrityError("invalid huffman code in stream")
    if has_escape:
        esc = idx == n_values
        if int(esc.sum()) != n_escaped:
            raise IntegrityError("escape count mismatch in huffman stream")
        out = np.empty(n, dtype=np.int64)
        out[~esc] = alphabet[idx[~esc]]
        out[esc] = escaped
    else:
        out = alphabet[idx]
    return out, pos
