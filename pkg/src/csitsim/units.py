"""Centralized dB/linear conversions.

All powers inside the library are carried in milliwatts, so dBm values are
10*log10(P_mW). Keeping the conversions in one place avoids scattered sign or
factor-of-10 mistakes.
"""

from __future__ import annotations

import numpy as np


def db_to_linear(x_db):
    """Convert a ratio in dB to linear scale."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x_linear):
    """Convert a linear ratio to dB. Zero maps to -inf."""
    x = np.asarray(x_linear, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def dbm_to_mw(p_dbm):
    """Convert power in dBm to milliwatts."""
    return db_to_linear(p_dbm)


def mw_to_dbm(p_mw):
    """Convert power in milliwatts to dBm. Zero maps to -inf."""
    return linear_to_db(p_mw)
