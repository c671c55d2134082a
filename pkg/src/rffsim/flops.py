"""FLOP and byte accounting for the latency model.

Counting conventions (fixed for all profiles): one complex multiply is 6
FLOPs and one complex add is 2; a complex divide is 11 (reciprocal plus
multiply); complex log/exp are charged a flat 20; a radix-2 FFT of size N
is 5*N*log2(N) real FLOPs.  Traffic charges every logical element read or
written exactly once, at 16 bytes per complex128 and 8 per float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class OpCounter:
    """Accumulates FLOPs and bytes over an instrumented run."""

    flops: int = 0
    bytes: int = 0

    COMPLEX_BYTES = 16
    REAL_BYTES = 8

    def cmul(self, n: int) -> None:
        self.flops += 6 * n

    def cadd(self, n: int) -> None:
        self.flops += 2 * n

    def cdiv(self, n: int) -> None:
        self.flops += 11 * n

    def clog(self, n: int) -> None:
        self.flops += 20 * n

    def cexp(self, n: int) -> None:
        self.flops += 20 * n

    def cabs(self, n: int) -> None:
        # 2 squares, 1 add, 1 sqrt
        self.flops += 4 * n

    def rmul(self, n: int) -> None:
        self.flops += n

    def radd(self, n: int) -> None:
        self.flops += n

    def fft(self, n: int) -> None:
        self.flops += int(5 * n * math.log2(n))

    def read(self, n_elems: int, elem_bytes: int) -> None:
        self.bytes += n_elems * elem_bytes

    def write(self, n_elems: int, elem_bytes: int) -> None:
        self.bytes += n_elems * elem_bytes
