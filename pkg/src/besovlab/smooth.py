"""Smooth transition functions used to build cutoffs and plateau bumps."""

import math

import numpy as np

__all__ = ["smoothstep", "SMOOTH_KINDS"]

SMOOTH_KINDS = ("poly", "exp")


def _poly_coefficients(order):
    # Odd-degree smoothstep S(x) = x^(n+1) * sum_k C(n+k, k) C(2n+1, n-k) (-x)^k,
    # degree 2n+1, with n derivatives vanishing at both ends.
    if order < 1 or order % 2 == 0:
        raise ValueError(f"smoothstep order must be odd and >= 1, got {order}")
    n = (order - 1) // 2
    coeffs = np.zeros(order + 1)
    for k in range(n + 1):
        coeffs[n + 1 + k] = (-1) ** k * math.comb(n + k, k) * math.comb(2 * n + 1, n - k)
    return coeffs


def _exp_bump(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smoothstep(x, order=7, kind="poly"):
    """Monotone transition from 0 (x <= 0) to 1 (x >= 1).

    Parameters
    ----------
    x : array_like
        Evaluation points.
    order : int
        Polynomial degree of the ``"poly"`` transition (odd). Degree 7 gives
        a C^3 junction with the constant pieces.
    kind : {"poly", "exp"}
        ``"exp"`` uses the C-infinity ratio e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}).

    Notes
    -----
    Both kinds satisfy S(x) + S(1 - x) = 1, so the integral over [0, 1] is 1/2.
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    if kind == "poly":
        return np.polynomial.polynomial.polyval(x, _poly_coefficients(order))
    if kind == "exp":
        a = _exp_bump(x)
        b = _exp_bump(1.0 - x)
        return a / (a + b)
    raise ValueError(f"unknown smoothstep kind {kind!r}; expected one of {SMOOTH_KINDS}")
