"""

   Common statistics library

   Trimmed for isingnet: summaries of repeated runs.

"""

# python libs
from math import sqrt


def mean(vals):
    """Computes the mean of a list of numbers"""
    n = 0
    s = 0.0
    for i in vals:
        s += i
        n += 1
    return s / float(n)


def variance(vals):
    """Sample variance"""
    u = mean(vals)
    return sum((x - u)**2 for x in vals) / float(len(vals)-1)


def sdev(vals):
    """Sample standard deviation"""
    return sqrt(variance(vals))


def summarize(vals):
    """
    Returns (mean, sdev) of a list of numbers

    A single value has a standard deviation of zero. An empty list gives
    (nan, nan).
    """
    vals = list(vals)
    if len(vals) == 0:
        return float("nan"), float("nan")
    if len(vals) == 1:
        return float(vals[0]), 0.0
    return mean(vals), sdev(vals)
