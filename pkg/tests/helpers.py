"""Shared helpers for the test suite."""

import numpy as np


def fit_slope(lengths, errors):
    """Least-squares slope of log(error) against log(length)."""
    lengths = np.asarray(lengths, dtype=float)
    errors = np.asarray(errors, dtype=float)
    return float(np.polyfit(np.log(lengths), np.log(errors), 1)[0])


def rolling_ball_generator(x_inc, area):
    """Antisymmetric generator x^1 A1 + x^2 A2 + a^{12} [A2, A1] of the log-ODE step."""
    from rdeinv.systems import ROLLING_BALL_A1, ROLLING_BALL_A2

    comm = ROLLING_BALL_A2 @ ROLLING_BALL_A1 - ROLLING_BALL_A1 @ ROLLING_BALL_A2
    return x_inc[0] * ROLLING_BALL_A1 + x_inc[1] * ROLLING_BALL_A2 + area * comm
