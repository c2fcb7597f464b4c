"""ADAM-driven (stochastic) training loop with optional l2-ball projection."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, minibatch_epoch
from .objective import ObjectiveSpec, evaluate
from .surrogate import make_loss
from .threshold import QUANTILE_KINDS, ThresholdRule, threshold

__all__ = [
    "AdamParams",
    "AdamState",
    "TrainConfig",
    "TrainHistory",
    "Model",
    "adam_step",
    "project_l2_ball",
    "train",
]


@dataclass(frozen=True)
class AdamParams:
    step_size: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.step_size < 0.0:
            raise ValueError("step_size must be non-negative")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


@dataclass
class AdamState:
    """Exponential moment estimates plus the step counter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, dim: int) -> "AdamState":
        return cls(m=np.zeros(dim), v=np.zeros(dim), step=0)


@dataclass(frozen=True)
class TrainConfig:
    """Iteration budget, ADAM parameters, minibatching and initialization.

    ``project_unit_ball=None`` means automatic: projection is applied exactly
    for the exact-quantile rules, where it is part of the original method;
    for the convex rules it would destroy convexity.
    """

    iterations: int = 1000
    adam: AdamParams = field(default_factory=AdamParams)
    n_minibatch: int = 1
    seed: int = 0
    project_unit_ball: bool | None = None
    init: str = "zeros"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.n_minibatch < 1:
            raise ValueError("n_minibatch must be positive")
        if self.init not in ("zeros", "uniform"):
            raise ValueError(f"init must be 'zeros' or 'uniform', got {self.init!r}")

    def resolve_projection(self, rule: ThresholdRule) -> bool:
        if self.project_unit_ball is None:
            return rule.kind in QUANTILE_KINDS
        return self.project_unit_ball

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "adam": {
                "step_size": self.adam.step_size,
                "beta1": self.adam.beta1,
                "beta2": self.adam.beta2,
                "epsilon": self.adam.epsilon,
            },
            "n_minibatch": self.n_minibatch,
            "seed": self.seed,
            "project_unit_ball": self.project_unit_ball,
            "init": self.init,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        adam = AdamParams(**doc.get("adam", {}))
        return cls(
            iterations=doc.get("iterations", 1000),
            adam=adam,
            n_minibatch=doc.get("n_minibatch", 1),
            seed=doc.get("seed", 0),
            project_unit_ball=doc.get("project_unit_ball"),
            init=doc.get("init", "zeros"),
        )


@dataclass
class TrainHistory:
    """Per-iteration trace: minibatch objective, post-step ||w||, wall time."""

    objective: np.ndarray
    w_norm: np.ndarray
    iter_ms: np.ndarray


@dataclass
class Model:
    """Trained weights with the threshold refit on the full training data."""

    w: np.ndarray
    spec: ObjectiveSpec
    config: TrainConfig
    t_final: float
    history: TrainHistory

    def to_dict(self) -> dict:
        rule = self.spec.rule
        return {
            "w": self.w.tolist(),
            "t_final": self.t_final,
            "spec": {
                "rule": {
                    "kind": rule.kind,
                    "k": rule.k,
                    "tau": rule.tau,
                    "beta": rule.beta,
                },
                "loss": self.spec.loss.kind,
                "lambda": self.spec.lam,
            },
            "config": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Model":
        rule_doc = doc["spec"]["rule"]
        spec = ObjectiveSpec(
            rule=ThresholdRule(
                kind=rule_doc["kind"],
                k=rule_doc.get("k"),
                tau=rule_doc.get("tau"),
                beta=rule_doc.get("beta"),
            ),
            loss=make_loss(doc["spec"].get("loss", "hinge")),
            lam=doc["spec"].get("lambda", 0.0),
        )
        empty = TrainHistory(np.array([]), np.array([]), np.array([]))
        return cls(
            w=np.asarray(doc["w"], dtype=np.float64),
            spec=spec,
            config=TrainConfig.from_dict(doc.get("config", {})),
            t_final=doc["t_final"],
            history=empty,
        )


def adam_step(
    state: AdamState, grad: np.ndarray, params: AdamParams
) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected ADAM update; returns the new state and weight delta."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.m.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match state")
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    step = state.step + 1
    m = params.beta1 * state.m + (1.0 - params.beta1) * grad
    v = params.beta2 * state.v + (1.0 - params.beta2) * grad * grad
    m_hat = m / (1.0 - params.beta1**step)
    v_hat = v / (1.0 - params.beta2**step)
    delta = -params.step_size * m_hat / (np.sqrt(v_hat) + params.epsilon)
    return AdamState(m=m, v=v, step=step), delta


def project_l2_ball(w: np.ndarray) -> np.ndarray:
    """w scaled back onto the unit l2 ball if it lies outside."""
    norm = float(np.linalg.norm(w))
    if norm <= 1.0:
        return w
    return w / norm


def train(spec: ObjectiveSpec, d_train: Dataset, cfg: TrainConfig) -> Model:
    """Run exactly ``cfg.iterations`` ADAM steps and refit the final threshold.

    Each iteration takes the next minibatch of the epoch schedule (the whole
    dataset when ``n_minibatch`` is 1), evaluates the objective and gradient
    on it, updates the weights and optionally projects them onto the unit
    ball.  Bitwise deterministic for fixed inputs and seed.
    """
    d_train.require_both_classes()
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "zeros":
        w = np.zeros(d_train.m)
    else:
        w = rng.uniform(-1.0, 1.0, d_train.m)
    project = cfg.resolve_projection(spec.rule)
    state = AdamState.fresh(d_train.m)
    objective_trace = np.empty(cfg.iterations)
    norm_trace = np.empty(cfg.iterations)
    ms_trace = np.empty(cfg.iterations)

    batches: list[np.ndarray] = []
    batch_data: list[Dataset] = []
    for it in range(cfg.iterations):
        tic = time.perf_counter()
        if cfg.n_minibatch == 1:
            batch = d_train
        else:
            pos = it % cfg.n_minibatch
            if pos == 0:
                epoch = it // cfg.n_minibatch
                batches = minibatch_epoch(d_train, cfg.n_minibatch, cfg.seed, epoch)
                batch_data = [d_train.subset(idx) for idx in batches]
            batch = batch_data[pos]
        value, grad, _ = evaluate(spec, w, batch)
        if not np.isfinite(value):
            raise FloatingPointError(
                f"objective became non-finite at iteration {it} (value {value!r})"
            )
        state, delta = adam_step(state, grad, cfg.adam)
        w = w + delta
        if project:
            w = project_l2_ball(w)
        objective_trace[it] = value
        norm_trace[it] = np.linalg.norm(w)
        ms_trace[it] = (time.perf_counter() - tic) * 1e3

    t_final = threshold(spec.rule, w, d_train, spec.loss).t
    history = TrainHistory(objective=objective_trace, w_norm=norm_trace, iter_ms=ms_trace)
    return Model(w=w, spec=spec, config=cfg, t_final=t_final, history=history)
