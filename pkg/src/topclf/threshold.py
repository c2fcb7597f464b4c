"""Score-dependent decision thresholds and their gradients.

Every training method in this package fixes the decision threshold t as a
function of the sample scores z_i = w.x_i.  Eight rules are supported:

==================== ======================================================
kind                 threshold definition
==================== ======================================================
top_push             largest negative score
top_push_k           mean of the k largest negative scores
quantile             largest t with at least ceil(n*tau) scores >= t
quantile_np          same, over negative scores and ceil(n_neg*tau)
surrogate_quantile   t solving mean_i l(beta*(z_i - t)) = tau, all samples
surrogate_quantile_np same, over negative samples
top_mean             mean of the ceil(n*tau) largest scores
top_mean_np          mean of the ceil(n_neg*tau) largest negative scores
==================== ======================================================

The top-k-mean rules return the mean of the supporting feature vectors as
the threshold gradient; the surrogate-quantile rules return the implicit
gradient sum(l'(beta*(z_i-t)) x_i) / sum(l'(beta*(z_i-t))); the exact
quantile rules return a zero gradient and expect the caller to recompute t
after each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .surrogate import SurrogateLoss, HINGE

__all__ = [
    "ThresholdRule",
    "ThresholdResult",
    "RULE_KINDS",
    "TOP_K_KINDS",
    "QUANTILE_KINDS",
    "SURROGATE_KINDS",
    "NEGATIVE_KINDS",
    "CLI_TOKENS",
    "rule_from_token",
    "scores",
    "top_k_mean",
    "exact_quantile",
    "surrogate_quantile",
    "threshold",
    "threshold_scored",
]

TOP_K_KINDS = frozenset({"top_push", "top_push_k", "top_mean", "top_mean_np"})
QUANTILE_KINDS = frozenset({"quantile", "quantile_np"})
SURROGATE_KINDS = frozenset({"surrogate_quantile", "surrogate_quantile_np"})
RULE_KINDS = TOP_K_KINDS | QUANTILE_KINDS | SURROGATE_KINDS

# rules whose threshold is computed from negative samples only
NEGATIVE_KINDS = frozenset(
    {"top_push", "top_push_k", "quantile_np", "surrogate_quantile_np", "top_mean_np"}
)

# command-line / config tokens
CLI_TOKENS = {
    "toppush": "top_push",
    "toppushk": "top_push_k",
    "grill": "quantile",
    "grill-np": "quantile_np",
    "patmat": "surrogate_quantile",
    "patmat-np": "surrogate_quantile_np",
    "topmean": "top_mean",
    "topmean-np": "top_mean_np",
}

_NEEDS_TAU = frozenset(RULE_KINDS - {"top_push", "top_push_k"})
_NEEDS_BETA = SURROGATE_KINDS


@dataclass(frozen=True)
class ThresholdRule:
    """One of the eight threshold definitions with its parameters."""

    kind: str
    k: int | None = None
    tau: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown threshold kind {self.kind!r}")
        if self.kind == "top_push_k":
            if self.k is None or self.k < 1:
                raise ValueError("top_push_k requires a positive integer k")
        elif self.kind == "top_push":
            # top_push is top_push_k with k = 1
            if self.k not in (None, 1):
                raise ValueError("top_push fixes k = 1")
        elif self.k is not None:
            raise ValueError(f"{self.kind} takes no k parameter")
        if self.kind in _NEEDS_TAU:
            if self.tau is None or not 0.0 < self.tau < 1.0:
                raise ValueError(f"{self.kind} requires tau in (0, 1)")
        elif self.tau is not None:
            raise ValueError(f"{self.kind} takes no tau parameter")
        if self.kind in _NEEDS_BETA:
            if self.beta is None or self.beta <= 0.0:
                raise ValueError(f"{self.kind} requires beta > 0")
        elif self.beta is not None:
            raise ValueError(f"{self.kind} takes no beta parameter")


@dataclass(frozen=True)
class ThresholdResult:
    """Threshold value, its gradient in w, and the samples determining it.

    ``support`` holds indices into the dataset the threshold was computed on
    (batch-relative when evaluated on a minibatch).
    """

    t: float
    grad_t: np.ndarray
    support: np.ndarray


def rule_from_token(
    token: str,
    k: int | None = None,
    tau: float | None = None,
    beta: float | None = None,
) -> ThresholdRule:
    """Build a rule from its CLI token, keeping only the parameters it uses."""
    if token not in CLI_TOKENS:
        raise ValueError(
            f"unknown method {token!r}; choose from {sorted(CLI_TOKENS)}"
        )
    kind = CLI_TOKENS[token]
    return ThresholdRule(
        kind=kind,
        k=k if kind == "top_push_k" else None,
        tau=tau if kind in _NEEDS_TAU else None,
        beta=beta if kind in _NEEDS_BETA else None,
    )


def scores(w: np.ndarray, d: Dataset) -> np.ndarray:
    """Linear scores z_i = w.x_i for every sample."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (d.m,):
        raise ValueError(f"weight shape {w.shape} does not match {d.m} features")
    z = d.features @ w
    if not np.all(np.isfinite(z)):
        raise ValueError("scores are not finite")
    return z


def top_k_mean(values: np.ndarray, k: int) -> tuple[float, np.ndarray]:
    """Mean of the k largest entries and their indices.

    Ties are broken toward the lowest index so the supporting set, and with
    it the gradient, is deterministic.
    """
    values = np.asarray(values, dtype=np.float64)
    if not 1 <= k <= values.size:
        raise ValueError(f"k must be in [1, {values.size}], got {k}")
    # stable argsort of the negated values: descending, ties by low index
    order = np.argsort(-values, kind="stable")
    support = order[:k]
    return float(values[support].mean()), support


def exact_quantile(values: np.ndarray, tau: float) -> float:
    """The ceil(tau*n)-th largest value.

    Equivalently the largest t such that at least a tau fraction of the
    entries is >= t.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot take a quantile of an empty vector")
    k = math.ceil(tau * values.size)
    if k < 1:
        raise ValueError(f"ceil(tau*n) must be >= 1, got tau={tau}, n={values.size}")
    k = min(k, values.size)
    return float(np.partition(values, values.size - k)[values.size - k])


def surrogate_quantile(
    values: np.ndarray, tau: float, beta: float, loss: SurrogateLoss = HINGE
) -> float:
    """Solve mean_i l(beta*(z_i - t)) = tau for t.

    The left side is continuous, non-increasing in t and strictly decreasing
    wherever it is positive, so the root is unique for tau in (0, 1).  For
    the hinge loss the equation is piecewise linear in t and is solved
    exactly by scanning the breakpoints t_j = z_(j) + 1/beta in descending
    score order; other losses fall back to bisection.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot take a surrogate quantile of an empty vector")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if loss.kind == "hinge":
        return _hinge_surrogate_quantile(values, tau, beta)
    return _bisect_surrogate_quantile(values, tau, beta, loss)


def _hinge_surrogate_quantile(values: np.ndarray, tau: float, beta: float) -> float:
    n = values.size
    z = np.sort(values)[::-1]
    prefix = np.concatenate(([0.0], np.cumsum(z)))
    # residual at breakpoint z_(j) + 1/beta, where the j-th term vanishes:
    # c_j = (beta/n) * sum_{i<j} (z_(i) - z_(j)), non-decreasing in j
    j = np.arange(n)
    c = (beta / n) * (prefix[j] - j * z)
    # mathematically non-decreasing; accumulate guards the binary search
    # against rounding wobble in the prefix-sum cancellation
    c = np.maximum.accumulate(c)
    first = int(np.searchsorted(c, tau, side="left"))
    if first >= n:
        # level tau lies below every breakpoint: all samples active
        return float(prefix[n] / n + (1.0 - tau) / beta)
    # on the segment ending at breakpoint index `first`, the active set is
    # the `first` largest scores; solve a + beta*(S_a - a t) = n tau
    a = first
    return float((a + beta * prefix[a] - n * tau) / (beta * a))


def _bisect_surrogate_quantile(
    values: np.ndarray, tau: float, beta: float, loss: SurrogateLoss, max_iter: int = 200
) -> float:
    def residual(t: float) -> float:
        return float(np.mean(loss.value(beta * (values - t)))) - tau

    hi = float(values.max()) + 1.0 / beta  # residual == -tau for our losses
    lo = float(values.min()) - 1.0 / beta
    span = max(hi - lo, 1.0)
    while residual(lo) < 0.0:
        lo -= span
        span *= 2.0
        if not math.isfinite(lo):
            raise RuntimeError("failed to bracket the surrogate quantile")
    # bisect until the bracket collapses to float resolution; stopping at the
    # residual tolerance early would leave jitter in t that finite-difference
    # consumers of the threshold gradient amplify by 1/h
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if residual(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    tol = 1e-10 * max(1.0, tau)
    if abs(residual(mid)) <= tol:
        return mid
    raise RuntimeError(
        f"surrogate quantile bisection did not converge after {max_iter} iterations"
    )


def threshold(
    rule: ThresholdRule, w: np.ndarray, d: Dataset, loss: SurrogateLoss = HINGE
) -> ThresholdResult:
    """Threshold, gradient and support for ``rule`` at weights ``w``."""
    return threshold_scored(rule, scores(w, d), d, loss)


def threshold_scored(
    rule: ThresholdRule, z: np.ndarray, d: Dataset, loss: SurrogateLoss = HINGE
) -> ThresholdResult:
    """Same as :func:`threshold` with the scores already computed."""
    kind = rule.kind
    if kind in NEGATIVE_KINDS:
        sel = d.neg_idx
    else:
        sel = np.arange(d.n)
    zsel = z[sel]
    if zsel.size == 0:
        raise ValueError(f"{kind} needs at least one sample in its score pool")

    if kind in TOP_K_KINDS:
        if kind == "top_push":
            k = 1
        elif kind == "top_push_k":
            k = rule.k
            if k > d.n_neg:
                raise ValueError(f"k={k} exceeds the {d.n_neg} negative samples")
        else:
            _check_tau_pool(rule.tau, zsel.size, kind)
            k = math.ceil(rule.tau * zsel.size)
        t, local = top_k_mean(zsel, k)
        support = sel[local]
        grad = d.features[support].mean(axis=0)
        return ThresholdResult(t=t, grad_t=grad, support=support)

    if kind in QUANTILE_KINDS:
        _check_tau_pool(rule.tau, zsel.size, kind)
        t = exact_quantile(zsel, rule.tau)
        # gradient treated as zero: t is recomputed after every step
        grad = np.zeros(d.m)
        support = sel[zsel == t]
        return ThresholdResult(t=t, grad_t=grad, support=support)

    # surrogate quantile kinds
    t = surrogate_quantile(zsel, rule.tau, rule.beta, loss)
    weights = loss.deriv(rule.beta * (zsel - t))
    denom = float(weights.sum())
    if denom <= 0.0:
        raise ValueError(
            "all surrogate derivatives vanished; the implicit threshold "
            "gradient is undefined"
        )
    grad = (weights @ d.features[sel]) / denom
    support = sel[weights > 0.0]
    return ThresholdResult(t=float(t), grad_t=grad, support=support)


def _check_tau_pool(tau: float, pool_size: int, kind: str) -> None:
    if tau * pool_size < 1.0:
        raise ValueError(
            f"{kind} needs tau * pool >= 1; got tau={tau} over {pool_size} samples"
        )
