"""Shared fixed-point scaling constants.

Average pooling divides a window sum by K_p^2. Hardware realizes the
division as one integer multiply followed by an arithmetic right shift;
the oracle and the fabric must pick identical (multiplier, shift) pairs
or they diverge on the low bit. The pair below is that contract.
"""

AVG_POOL_SHIFT = 15


def avg_pool_scale(pool_k: int) -> tuple[int, int]:
    """(multiplier, shift) such that x*mult >> shift ~= x / pool_k**2.

    Exact for power-of-two windows (the common case); nearest fixed-point
    approximation otherwise.
    """
    if pool_k < 1:
        raise ValueError(f"pool_k must be >= 1, got {pool_k}")
    mult = round((1 << AVG_POOL_SHIFT) / (pool_k * pool_k))
    return mult, AVG_POOL_SHIFT
