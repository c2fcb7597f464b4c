"""Shared generators and oracles for the test suite."""

import math

import numpy as np

from topclf.data import Dataset
from topclf.threshold import scores, threshold_scored


def random_dataset(rng, n=50, m=5, pos_frac=0.5, scale=1.0):
    """Random dense dataset guaranteed to contain both classes."""
    features = scale * rng.standard_normal((n, m))
    labels = rng.random(n) < pos_frac
    if labels.all():
        labels[rng.integers(n)] = False
    if not labels.any():
        labels[rng.integers(n)] = True
    return Dataset(features, labels)


def brute_force_quantile(values, tau):
    """Largest candidate t with at least a tau fraction of entries >= t.

    Candidates are the score values themselves; checks the count predicate
    directly instead of selecting by rank.
    """
    values = list(values)
    need = math.ceil(tau * len(values))
    feasible = [v for v in values if sum(x >= v for x in values) >= need]
    return max(feasible)


def grid_solve(fun, lo, hi, levels=4, points=2000):
    """Find a zero of a monotone decreasing function by nested grid zoom."""
    for _ in range(levels):
        grid = np.linspace(lo, hi, points)
        vals = np.array([fun(t) for t in grid])
        below = np.flatnonzero(vals <= 0.0)
        i = below[0] if below.size else points - 1
        lo, hi = grid[max(i - 1, 0)], grid[i]
    return 0.5 * (lo + hi)


def central_diff(f, w, h=1e-6):
    """Central finite-difference gradient of a scalar function of w."""
    w = np.asarray(w, dtype=np.float64)
    g = np.zeros_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        g[j] = (f(w + e) - f(w - e)) / (2.0 * h)
    return g


def active_pattern(rule, w, d, loss):
    """Snapshot of everything that kinks the threshold at w.

    Two weight vectors with the same pattern lie on the same smooth piece,
    so finite differences across them are trustworthy.
    """
    z = scores(w, d)
    tres = threshold_scored(rule, z, d, loss)
    return frozenset(tres.support.tolist())


def objective_pattern(spec, w, d):
    """Pattern for the full objective: threshold support plus loss branches."""
    z = scores(w, d)
    tres = threshold_scored(spec.rule, z, d, spec.loss)
    up = tres.t - z[d.pos_idx]
    branches = tuple((up > -1.0).tolist())
    if spec.include_fp:
        un = z[d.neg_idx] - tres.t
        branches = branches + tuple((un > -1.0).tolist())
    return (frozenset(tres.support.tolist()), branches)


def is_stable(pattern_fn, w, h=1e-6):
    """True when the active pattern is identical at w and all w +- h e_j."""
    base = pattern_fn(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        if pattern_fn(w + e) != base or pattern_fn(w - e) != base:
            return False
    return True


def tied_integer_dataset(rng, n, tau):
    """Integer scores with the quantile value tied downward from rank n*tau.

    The tie block starts exactly at the quantile rank, so the count of
    samples at or above the quantile equals n*tau + q - 1 by construction.
    """
    k = round(n * tau)
    base = rng.choice(np.arange(-3 * n, 3 * n), size=n, replace=False)
    z = np.sort(base)[::-1].astype(float)
    extra_ties = int(rng.integers(1, 4))
    stop = min(k + extra_ties, n)
    z[k:stop] = z[k - 1]
    labels = rng.random(n) < 0.5
    if labels.all():
        labels[0] = False
    if not labels.any():
        labels[0] = True
    return Dataset(z[:, None], labels)
