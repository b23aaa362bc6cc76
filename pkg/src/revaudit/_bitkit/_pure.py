"""Pure-Python bit kernel: big-endian bit reads/writes over byte buffers.

Bit positions count from the most significant bit of byte 0. This is the
fallback used when the compiled kernel is unavailable; both expose the same
four functions.
"""

from __future__ import annotations

IMPLEMENTATION = "pure"


def read_uint(data: bytes, pos: int, width: int) -> int:
    """Read an unsigned big-endian integer of `width` bits starting at `pos`."""
    if width == 0:
        return 0
    end = pos + width
    if pos < 0 or width < 0 or end > len(data) * 8:
        raise ValueError("bit range out of bounds")
    byte_start = pos >> 3
    byte_end = (end + 7) >> 3
    chunk = int.from_bytes(data[byte_start:byte_end], "big")
    tail = (byte_end << 3) - end
    return (chunk >> tail) & ((1 << width) - 1)


def read_set_bits(data: bytes, pos: int, count: int) -> list[int]:
    """Return 1-based offsets of set bits within the `count`-bit field at `pos`.

    Offset 1 is the first (most significant) bit of the field, so a TCF
    bitfield maps directly to ids. Cost scales with the number of set bits,
    not the field width.
    """
    if count == 0:
        return []
    end = pos + count
    if pos < 0 or count < 0 or end > len(data) * 8:
        raise ValueError("bit range out of bounds")
    byte_start = pos >> 3
    byte_end = (end + 7) >> 3
    chunk = int.from_bytes(data[byte_start:byte_end], "big")
    tail = (byte_end << 3) - end
    val = (chunk >> tail) & ((1 << count) - 1)
    out: list[int] = []
    while val:
        low = val & -val
        out.append(count - low.bit_length() + 1)
        val ^= low
    out.reverse()
    return out


def write_uint(buf: bytearray, pos: int, width: int, value: int) -> None:
    """OR `value` (must fit `width` bits) into `buf` at bit position `pos`."""
    if width == 0:
        return
    end = pos + width
    if pos < 0 or width < 0 or end > len(buf) * 8:
        raise ValueError("bit range out of bounds")
    if value < 0 or value >> width:
        raise ValueError("value exceeds field width")
    byte_start = pos >> 3
    byte_end = (end + 7) >> 3
    tail = (byte_end << 3) - end
    span = byte_end - byte_start
    chunk = int.from_bytes(buf[byte_start:byte_end], "big") | (value << tail)
    buf[byte_start:byte_end] = chunk.to_bytes(span, "big")


def set_bit(buf: bytearray, pos: int) -> None:
    """Set the single bit at position `pos`."""
    if pos < 0 or pos >= len(buf) * 8:
        raise ValueError("bit range out of bounds")
    buf[pos >> 3] |= 0x80 >> (pos & 7)
