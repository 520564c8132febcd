#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Numeric oracles for the statistics question types

    - :func:`pearson`: product-moment correlation coefficient
    - :func:`variance_ratio_test`: two-sided F test of equal variances
    - :func:`normality_check`: Jarque-Bera test from sample skewness and
      excess kurtosis

Decisions are made against critical values at significance level
``alpha`` (0.05 by default); no p-values are computed.

.. codeauthor: entitytables developers
"""
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from . import entityerror as ee

logger = logging.getLogger(__name__)

ALPHA = 0.05


@dataclass(frozen=True)
class HypothesisOutcome:
    """ The statistic of a test and its decision at ``alpha``.

    ``significant`` is True when the null hypothesis (equal variances,
    normality) is rejected.
    """
    test: str
    statistic: float
    critical: float
    significant: bool
    alpha: float = ALPHA

    def to_dict(self):
        return asdict(self)


def _as_array(values, test_name):
    try:
        a = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        raise ee.PreconditionError(test_name, 'non-numeric input')
    if a.ndim != 1 or not np.all(np.isfinite(a)):
        raise ee.PreconditionError(test_name, 'input must be a finite list')
    return a


def pearson(xs, ys):
    """ Pearson's product-moment correlation of ``xs`` and ``ys``.

    Raises:
        PreconditionError: unequal lengths or fewer than 3 values
        DegenerateInputError: either side has zero variance
    """
    x = _as_array(xs, 'pearson')
    y = _as_array(ys, 'pearson')
    if len(x) != len(y):
        raise ee.PreconditionError('pearson', 'lengths differ')
    if len(x) < 3:
        raise ee.PreconditionError('pearson', 'need at least 3 pairs')
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ee.DegenerateInputError('pearson')
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def variance_ratio_test(xs, ys, alpha=ALPHA):
    """ F test of equal variances: larger sample variance over smaller.

    The larger variance is the numerator, so the decision compares F with
    the upper alpha/2 critical value of F(n_large - 1, n_small - 1).

    Raises:
        PreconditionError: a sample has fewer than 2 values
        DegenerateInputError: both samples have zero variance
    """
    x = _as_array(xs, 'variance_ratio_test')
    y = _as_array(ys, 'variance_ratio_test')
    if len(x) < 2 or len(y) < 2:
        raise ee.PreconditionError('variance_ratio_test',
                                   'need at least 2 values per sample')
    vx = float(np.var(x, ddof=1))
    vy = float(np.var(y, ddof=1))
    if vx == 0.0 and vy == 0.0:
        raise ee.DegenerateInputError('variance_ratio_test')
    (v_hi, n_hi), (v_lo, n_lo) = sorted([(vx, len(x)), (vy, len(y))],
                                        reverse=True)
    critical = float(stats.f.ppf(1.0 - alpha/2, n_hi - 1, n_lo - 1))
    if v_lo == 0.0:
        return HypothesisOutcome('variance_ratio_test', math.inf, critical,
                                 True, alpha)
    f_stat = v_hi / v_lo
    return HypothesisOutcome('variance_ratio_test', f_stat, critical,
                             f_stat > critical, alpha)


def normality_check(xs, alpha=ALPHA):
    """ Jarque-Bera test: n/6 * (S**2 + K**2/4) against chi-square(2).

    S and K are the sample skewness and excess kurtosis from population
    (biased) central moments.

    Raises:
        PreconditionError: fewer than 8 values
        DegenerateInputError: zero variance
    """
    x = _as_array(xs, 'normality_check')
    n = len(x)
    if n < 8:
        raise ee.PreconditionError('normality_check', 'need at least 8 values')
    d = x - x.mean()
    m2 = float(np.mean(d**2))
    if m2 == 0.0:
        raise ee.DegenerateInputError('normality_check')
    skew = float(np.mean(d**3)) / m2**1.5
    kurt = float(np.mean(d**4)) / m2**2 - 3.0
    jb = n / 6.0 * (skew**2 + kurt**2 / 4.0)
    critical = float(stats.chi2.ppf(1.0 - alpha, 2))
    logger.debug("normality: n=%d skew=%.4f kurt=%.4f JB=%.4f", n, skew,
                 kurt, jb)
    return HypothesisOutcome('normality_check', jb, critical, jb > critical,
                             alpha)
