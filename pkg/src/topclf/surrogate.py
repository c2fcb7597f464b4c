"""Convex surrogate losses standing in for the 0-1 step function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SurrogateLoss", "HINGE", "QUADRATIC_HINGE", "make_loss"]

_KINDS = ("hinge", "quadratic_hinge")


@dataclass(frozen=True)
class SurrogateLoss:
    """Convex, non-negative, non-decreasing scalar loss with value 1 at zero.

    ``hinge`` is max(0, 1+z); ``quadratic_hinge`` is max(0, 1+z)^2.  At the
    hinge kink z = -1 the derivative is the right-derivative, so gradients
    are deterministic everywhere.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown surrogate loss {self.kind!r}; choose from {_KINDS}")

    def value(self, z):
        z = _require_finite(z)
        if self.kind == "hinge":
            return np.maximum(0.0, 1.0 + z)
        return np.maximum(0.0, 1.0 + z) ** 2

    def deriv(self, z):
        z = _require_finite(z)
        if self.kind == "hinge":
            return (z >= -1.0).astype(np.float64)
        return 2.0 * np.maximum(0.0, 1.0 + z)

    @property
    def deriv_at_zero(self) -> float:
        return 1.0 if self.kind == "hinge" else 2.0


def _require_finite(z):
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("surrogate loss input must be finite")
    return z


HINGE = SurrogateLoss("hinge")
QUADRATIC_HINGE = SurrogateLoss("quadratic_hinge")


def make_loss(name: str) -> SurrogateLoss:
    """Loss from its config token ("hinge" or "quadratic_hinge")."""
    return SurrogateLoss(name)
