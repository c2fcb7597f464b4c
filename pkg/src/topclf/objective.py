"""Surrogate training objective and its chain-rule gradient.

The objective is the mean surrogate false-negative count above the rule's
threshold, plus optional l2 regularization:

    f(w) = (1/n+) sum_{x in positives} l(t(w) - w.x) + (lambda/2) ||w||^2

The two exact-quantile rules additionally add the mean surrogate
false-positive count (1/n-) sum_{x in negatives} l(w.x - t(w)), which is
what keeps them away from the all-zero minimizer at the price of convexity.

The gradient differentiates through the threshold:

    grad f(w) = (1/n+) sum l'(t(w) - w.x) (grad t(w) - x) + lambda w
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .surrogate import SurrogateLoss, HINGE
from .threshold import (
    QUANTILE_KINDS,
    ThresholdResult,
    ThresholdRule,
    scores,
    threshold_scored,
)

__all__ = ["ObjectiveSpec", "surrogate_counts", "objective", "gradient", "evaluate"]


@dataclass(frozen=True)
class ObjectiveSpec:
    """Threshold rule, surrogate loss and regularization weight.

    ``include_fp`` is forced to match the rule: exactly the exact-quantile
    rules carry the false-positive term.
    """

    rule: ThresholdRule
    loss: SurrogateLoss = HINGE
    lam: float = 0.0
    include_fp: bool | None = None

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        expected = self.rule.kind in QUANTILE_KINDS
        if self.include_fp is None:
            object.__setattr__(self, "include_fp", expected)
        elif self.include_fp != expected:
            raise ValueError(
                f"include_fp={self.include_fp} contradicts rule kind "
                f"{self.rule.kind!r} (must be {expected})"
            )


def surrogate_counts(
    w: np.ndarray, t: float, d: Dataset, loss: SurrogateLoss = HINGE
) -> tuple[float, float, float, float]:
    """Unnormalized surrogate confusion sums (fn_s, fp_s, tp_s, tn_s)."""
    z = scores(w, d)
    zp, zn = z[d.pos_idx], z[d.neg_idx]
    fn_s = float(loss.value(t - zp).sum())
    fp_s = float(loss.value(zn - t).sum())
    tp_s = float(loss.value(zp - t).sum())
    tn_s = float(loss.value(t - zn).sum())
    return fn_s, fp_s, tp_s, tn_s


def evaluate(
    spec: ObjectiveSpec, w: np.ndarray, d: Dataset
) -> tuple[float, np.ndarray, ThresholdResult]:
    """Objective value and gradient in one pass, sharing the score buffer."""
    d.require_both_classes()
    w = np.asarray(w, dtype=np.float64)
    z = scores(w, d)
    tres = threshold_scored(spec.rule, z, d, spec.loss)
    xp = d.features[d.pos_idx]
    up = tres.t - z[d.pos_idx]

    value = float(spec.loss.value(up).mean())
    dup = spec.loss.deriv(up)
    grad = (dup.sum() * tres.grad_t - dup @ xp) / d.n_pos

    if spec.include_fp:
        xn = d.features[d.neg_idx]
        un = z[d.neg_idx] - tres.t
        value += float(spec.loss.value(un).mean())
        dun = spec.loss.deriv(un)
        grad += (dun @ xn - dun.sum() * tres.grad_t) / d.n_neg

    if spec.lam:
        value += 0.5 * spec.lam * float(w @ w)
        grad = grad + spec.lam * w
    return value, grad, tres


def objective(spec: ObjectiveSpec, w: np.ndarray, d: Dataset) -> float:
    """f(w) on dataset ``d`` (full data or a minibatch)."""
    value, _, _ = evaluate(spec, w, d)
    return value


def gradient(spec: ObjectiveSpec, w: np.ndarray, d: Dataset) -> np.ndarray:
    """grad f(w) using the implicit threshold gradient."""
    _, grad, _ = evaluate(spec, w, d)
    return grad
