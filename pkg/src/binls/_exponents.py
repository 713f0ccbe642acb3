import math


def critical_exponents(N: int) -> tuple[float, float]:
    """Mass-critical exponent ``2 + 8/N`` and the Sobolev exponent (``inf`` for N <= 4)."""
    if N < 1:
        raise ValueError(f"dimension must be >= 1, got {N}")
    r_bar = 2.0 + 8.0 / N
    two_star_star = 2.0 * N / (N - 4) if N >= 5 else math.inf
    return r_bar, two_star_star


def gamma_r(N: int, r: float) -> float:
    _, top = critical_exponents(N)
    if not 2.0 < r < top:
        raise ValueError(f"exponent r={r} outside (2, {top}) for N={N}")
    return N * (r - 2.0) / (4.0 * r)
