import numpy as np
from sklearn.utils.validation import check_consistent_length, column_or_1d

from .economy import EconomyConfig, ValuationKind


def check_types(theta, beta=None):
    """Validate type values and probabilities as 1-D float arrays.

    ``beta=None`` means uniform.  Probabilities are renormalised when they
    sum to one only up to float noise.
    """
    theta = column_or_1d(np.asarray(theta, dtype=float), warn=True)
    if beta is None:
        beta = np.full(theta.shape, 1.0 / len(theta))
    else:
        beta = column_or_1d(np.asarray(beta, dtype=float), warn=True)
        check_consistent_length(theta, beta)
        if abs(beta.sum() - 1.0) < 1e-9:
            beta = beta / beta.sum()
    if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(beta)):
        raise ValueError("theta and beta must be finite")
    return theta, beta


def check_valuation(valuation, alpha=None):
    if isinstance(valuation, ValuationKind):
        return valuation
    if valuation == "power":
        return ValuationKind.power(alpha if alpha is not None else 0.5)
    return ValuationKind.parse(valuation)


def make_config(theta, beta, c, valuation, alpha=None):
    theta, beta = check_types(theta, beta)
    return EconomyConfig(tuple(theta), tuple(beta), float(c), check_valuation(valuation, alpha))
