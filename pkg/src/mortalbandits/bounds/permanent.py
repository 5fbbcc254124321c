"""Exact matrix permanent (Ryser's inclusion-exclusion with Gray-code order)."""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..errors import SizeGuardError

MAX_PERMANENT_SIZE = 12


def permanent(M) -> float:
    """perm(M) = (-1)^n sum_{S subset cols} (-1)^{|S|} prod_i sum_{j in S} M_ij."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n == 0:
        return 1.0
    if n > MAX_PERMANENT_SIZE:
        raise SizeGuardError(
            f"{n}x{n} permanent exceeds the {MAX_PERMANENT_SIZE} guard; "
            "use the closed-form order-statistic path instead"
        )
    row_sums = np.zeros(n)
    total = 0.0
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        flipped = gray ^ prev_gray
        col = flipped.bit_length() - 1
        if gray & flipped:
            row_sums += A[:, col]
        else:
            row_sums -= A[:, col]
        prev_gray = gray
        sign = -1.0 if bin(gray).count("1") & 1 else 1.0
        total += sign * float(np.prod(row_sums))
    return (-1.0) ** n * total


def permanent_naive(M) -> float:
    """Sum over all n! permutations; an independent check for small n."""
    A = np.asarray(M, dtype=float)
    n = A.shape[0]
    return math.fsum(
        math.prod(A[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))
    )
