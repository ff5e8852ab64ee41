"""
Bessel and Hankel functions of order 0 and 1 for real arguments

The public evaluators delegate to scipy.special. An independent two-branch
evaluator (power series below t_star, Hankel asymptotic expansion above) is
kept alongside so the library values can be cross-checked.
"""

import math
from typing import Tuple, Union

import numpy as np
from scipy import special
from loguru import logger

from src.errors import OrderOutOfRangeError, SingularArgumentError

ArrayLike = Union[float, np.ndarray]

EULER_GAMMA = 0.5772156649015329
T_STAR = 12.0
SUPPORTED_ORDERS = (0, 1)


def _check_order(n: int):
    if n not in SUPPORTED_ORDERS:
        raise OrderOutOfRangeError(f"order {n} not supported (only 0 and 1)")


def _as_array(t: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ValueError("argument must be nonnegative")
    return arr, arr.ndim == 0


def _out(value: np.ndarray, scalar: bool):
    return value.item() if scalar else value


def bessel_j(n: int, t: ArrayLike) -> ArrayLike:
    """J_n(t) for n in {0, 1}, t >= 0"""
    _check_order(n)
    arr, scalar = _as_array(t)
    value = special.j0(arr) if n == 0 else special.j1(arr)
    return _out(np.asarray(value), scalar)


def bessel_y(n: int, t: ArrayLike) -> ArrayLike:
    """Y_n(t) for n in {0, 1}, t > 0"""
    _check_order(n)
    arr, scalar = _as_array(t)
    if np.any(arr == 0):
        raise SingularArgumentError("Y_n is singular at t = 0")
    value = special.y0(arr) if n == 0 else special.y1(arr)
    return _out(np.asarray(value), scalar)


def hankel1(n: int, t: ArrayLike) -> ArrayLike:
    """H^(1)_n(t) = J_n(t) + i Y_n(t) for n in {0, 1}, t > 0"""
    _check_order(n)
    arr, scalar = _as_array(t)
    if np.any(arr == 0):
        raise SingularArgumentError("H^(1)_n is singular at t = 0")
    value = special.hankel1(n, arr)
    return _out(np.asarray(value), scalar)


# ---------------------------------------------------------------------------
# Independent branches
# ---------------------------------------------------------------------------

def _series_j(n: int, t: float) -> float:
    half = 0.5 * t
    term = half ** n / math.factorial(n)
    total = term
    p = 0
    while True:
        p += 1
        term *= -(half * half) / (p * (n + p))
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)) and p > 2:
            return total


def _series_y(n: int, t: float) -> float:
    quarter = 0.25 * t * t
    log_half = math.log(0.5 * t)

    if n == 0:
        j0 = _series_j(0, t)
        total = 0.0
        harmonic = 0.0
        power = 1.0
        k = 0
        while True:
            k += 1
            harmonic += 1.0 / k
            power *= quarter / (k * k)
            term = (-1) ** (k + 1) * harmonic * power
            total += term
            if abs(term) < 1e-18 * max(1.0, abs(total)) and k > 2:
                break
        return (2.0 / math.pi) * ((log_half + EULER_GAMMA) * j0 + total)

    j1 = _series_j(1, t)
    total = 0.0
    harmonic = 0.0      # H_k
    power = 0.5 * t     # (-t^2/4)^k (t/2) / (k! (k+1)!)
    k = 0
    while True:
        psi_sum = 2.0 * (-EULER_GAMMA) + harmonic + (harmonic + 1.0 / (k + 1))
        term = psi_sum * power
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)) and k > 2:
            break
        k += 1
        harmonic += 1.0 / k
        power *= -quarter / (k * (k + 1))
    return -2.0 / (math.pi * t) + (2.0 / math.pi) * log_half * j1 - total / math.pi


def series_bessel(n: int, t: float) -> Tuple[float, float]:
    """(J_n(t), Y_n(t)) from the convergent power series"""
    _check_order(n)
    if t <= 0:
        raise SingularArgumentError("series branch needs t > 0")
    return _series_j(n, t), _series_y(n, t)


def asymptotic_bessel(n: int, t: float) -> Tuple[float, float]:
    """(J_n(t), Y_n(t)) from the Hankel asymptotic expansion, truncated at the smallest term"""
    _check_order(n)
    if t <= 0:
        raise SingularArgumentError("asymptotic branch needs t > 0")

    mu = 4.0 * n * n
    p_sum, q_sum = 0.0, 0.0
    coeff = 1.0
    last = math.inf
    k = 0
    while True:
        term = coeff / t ** k
        if abs(term) > last or abs(term) < 1e-17:
            break
        last = abs(term)
        if k % 2 == 0:
            p_sum += (-1) ** (k // 2) * term
        else:
            q_sum += (-1) ** ((k - 1) // 2) * term
        k += 1
        coeff *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
        if coeff == 0.0:
            break

    chi = t - (0.5 * n + 0.25) * math.pi
    amp = math.sqrt(2.0 / (math.pi * t))
    j_val = amp * (p_sum * math.cos(chi) - q_sum * math.sin(chi))
    y_val = amp * (p_sum * math.sin(chi) + q_sum * math.cos(chi))
    return j_val, y_val


def two_branch(n: int, t: float, t_star: float = T_STAR) -> Tuple[float, float]:
    """(J_n, Y_n) from the series below t_star and the asymptotic expansion above"""
    if t < t_star:
        return series_bessel(n, t)
    return asymptotic_bessel(n, t)


def crossover_report(band: Tuple[float, float] = (12.0, 16.0), samples: int = 41) -> float:
    """Largest |series - asymptotic| over both orders and both kinds on a band"""
    worst = 0.0
    for n in SUPPORTED_ORDERS:
        for t in np.linspace(band[0], band[1], samples):
            js, ys = series_bessel(n, float(t))
            ja, ya = asymptotic_bessel(n, float(t))
            worst = max(worst, abs(js - ja), abs(ys - ya))
    logger.debug(f"Series/asymptotic crossover deviation on {band}: {worst:.3e}")
    return worst
