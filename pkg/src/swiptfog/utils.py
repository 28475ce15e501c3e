import math

# The log-distance path loss diverges at zero range; anything closer is rejected.
D_MIN = 0.1

LN2 = math.log(2.0)

# Keeps rho strictly inside (0, 1).
RHO_MARGIN = 1e-9


def exp2m1(x: float) -> float:
    """2**x - 1, accurate for small x and inf on overflow."""
    try:
        return math.expm1(x * LN2)
    except OverflowError:
        return math.inf


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)
