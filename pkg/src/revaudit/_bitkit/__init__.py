"""Bit-level kernel for the consent-string codec.

Prefers the compiled extension; falls back to the pure-Python twin when the
extension was not built (or REVAUDIT_PURE_BITKIT is set). `IMPLEMENTATION`
reports which one is active.
"""

import os

if os.environ.get("REVAUDIT_PURE_BITKIT"):
    from revaudit._bitkit._pure import (
        IMPLEMENTATION,
        read_set_bits,
        read_uint,
        set_bit,
        write_uint,
    )
else:
    try:
        from revaudit._bitkit._fast import (  # type: ignore[import-not-found]
            IMPLEMENTATION,
            read_set_bits,
            read_uint,
            set_bit,
            write_uint,
        )
    except ImportError:
        from revaudit._bitkit._pure import (
            IMPLEMENTATION,
            read_set_bits,
            read_uint,
            set_bit,
            write_uint,
        )

__all__ = ["IMPLEMENTATION", "read_uint", "read_set_bits", "write_uint", "set_bit"]
