# cython: language_level=3
"""Compiled bit kernel: big-endian bit reads/writes over byte buffers.

Mirrors revaudit._bitkit._pure exactly; selected at import when built.
"""

IMPLEMENTATION = "cython"


def read_uint(const unsigned char[:] data, Py_ssize_t pos, Py_ssize_t width):
    cdef Py_ssize_t end = pos + width
    cdef Py_ssize_t i
    cdef unsigned long long acc = 0
    cdef unsigned long long mask
    if width == 0:
        return 0
    if pos < 0 or width < 0 or end > data.shape[0] * 8:
        raise ValueError("bit range out of bounds")
    if width <= 57:
        # fits an unsigned 64-bit accumulator with up to 7 leading slack bits
        for i in range(pos >> 3, (end + 7) >> 3):
            acc = (acc << 8) | data[i]
        mask = ((<unsigned long long>1) << width) - 1
        return (acc >> ((((end + 7) >> 3) << 3) - end)) & mask
    return _read_uint_wide(data, pos, width)


cdef object _read_uint_wide(const unsigned char[:] data, Py_ssize_t pos, Py_ssize_t width):
    cdef object chunk = 0
    cdef Py_ssize_t i
    cdef Py_ssize_t end = pos + width
    for i in range(pos >> 3, (end + 7) >> 3):
        chunk = (chunk << 8) | data[i]
    return (chunk >> ((((end + 7) >> 3) << 3) - end)) & ((<object>1 << width) - 1)


def read_set_bits(const unsigned char[:] data, Py_ssize_t pos, Py_ssize_t count):
    cdef Py_ssize_t end = pos + count
    cdef Py_ssize_t i, bit, first, last
    cdef unsigned char b
    cdef list out = []
    if count == 0:
        return out
    if pos < 0 or count < 0 or end > data.shape[0] * 8:
        raise ValueError("bit range out of bounds")
    first = pos >> 3
    last = (end - 1) >> 3
    for i in range(first, last + 1):
        b = data[i]
        if b == 0:
            continue
        for bit in range(8):
            if b & (0x80 >> bit):
                offset = (i << 3) + bit - pos
                if 0 <= offset < count:
                    out.append(offset + 1)
    return out


def write_uint(unsigned char[:] buf, Py_ssize_t pos, Py_ssize_t width, object value):
    cdef Py_ssize_t end = pos + width
    cdef Py_ssize_t i, shift
    if width == 0:
        return
    if pos < 0 or width < 0 or end > buf.shape[0] * 8:
        raise ValueError("bit range out of bounds")
    if value < 0 or (value >> width) != 0:
        raise ValueError("value exceeds field width")
    cdef object v = value << (((((end + 7) >> 3) << 3)) - end)
    cdef Py_ssize_t byte_end = (end + 7) >> 3
    for i in range(byte_end - 1, (pos >> 3) - 1, -1):
        buf[i] |= <unsigned char>(v & 0xFF)
        v >>= 8


def set_bit(unsigned char[:] buf, Py_ssize_t pos):
    if pos < 0 or pos >= buf.shape[0] * 8:
        raise ValueError("bit range out of bounds")
    buf[pos >> 3] |= 0x80 >> (pos & 7)
