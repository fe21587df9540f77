"""Variational (Donsker-Varadhan type) Renyi divergence estimation.

For order ``alpha`` and critic ``T`` the objective is

    V(T) = 1/(alpha-1) log E_Q[exp((alpha-1) T)] - 1/alpha log E_P[exp(alpha T)]

whose supremum over all critics equals ``D_alpha(Q||P) / alpha``. Training
maximizes ``V`` over a ReLU critic by minibatch gradient ascent, with the
two batch-mean denominators of the gradient replaced by exponential moving
averages (MINE-style bias correction). The reported divergence is the
held-out objective scaled by ``alpha``.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp

from rdp_audit.critic import CriticNetwork
from rdp_audit.divergence import OrderLike, SampleSet, as_order, as_values
from rdp_audit.exceptions import TrainingError


@dataclasses.dataclass(frozen=True)
class DvConfig:
    """Hyperparameters of the variational estimator.

    The defaults use two hidden layers of 100 ReLU units, batch size 400,
    EMA rate 0.99 and an 80/20 train/validation split. ``step_size`` and
    ``epochs`` are tuned for plain gradient ascent on standardized inputs.

    ``clamp_bound`` defaults to 1.5. An unbounded critic can drive the
    empirical objective to infinity on a few thousand samples (the
    exponential moments are dominated by the largest draws), and even a
    well-trained unbounded critic has a held-out estimate with large spread.
    The clamp trades a small downward bias (the estimate then targets the
    divergence restricted to bounded critics, which is still a valid lower
    bound) for a much tighter spread. Pass ``clamp_bound=None`` to disable it.
    """

    alpha: float = 2.0
    batch_size: int = 400
    ema_rate: float = 0.99
    step_size: float = 0.05
    epochs: int = 40
    train_fraction: float = 0.8
    seed: int = 0
    clamp_bound: float | None = 1.5
    param_radius: float | None = None
    layer_sizes: tuple[int, ...] = (1, 100, 100, 1)
    standardize: bool = True

    def __post_init__(self):
        as_order(self.alpha)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0.0 < self.ema_rate < 1.0:
            raise ValueError("ema_rate must lie in (0, 1)")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1]")

    def replace(self, **changes) -> DvConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["layer_sizes"] = list(self.layer_sizes)
        return d


@dataclasses.dataclass(frozen=True)
class DvEstimate:
    """Output of :func:`train`.

    Attributes:
      r_hat: held-out variational value.
      d_hat: ``alpha * r_hat``, the estimate on the Renyi-divergence scale.
      objective_trace: mean minibatch objective per epoch.
      critic: the trained critic (treat as frozen).
      config: the configuration that produced it.
      n_train, n_validation: split sizes as (Q, P) pairs.
    """

    r_hat: float
    d_hat: float
    objective_trace: tuple[float, ...]
    critic: CriticNetwork
    config: DvConfig
    n_train: tuple[int, int]
    n_validation: tuple[int, int]


def _log_mean_exp(z: np.ndarray) -> float:
    return float(logsumexp(z) - math.log(z.size))


def dv_objective(t_on_q: Sequence[float], t_on_p: Sequence[float], order: OrderLike) -> float:
    """The variational objective for critic values on Q and P samples."""
    alpha = as_order(order).alpha
    tq = np.asarray(t_on_q, dtype=np.float64).reshape(-1)
    tp = np.asarray(t_on_p, dtype=np.float64).reshape(-1)
    if tq.size == 0 or tp.size == 0:
        raise ValueError("dv_objective needs nonempty critic values on both sides")
    return _log_mean_exp((alpha - 1.0) * tq) / (alpha - 1.0) - _log_mean_exp(alpha * tp) / alpha


def evaluate(critic: CriticNetwork, samples_q, samples_p, order: OrderLike) -> float:
    """Full-batch objective of a fixed critic on the given samples."""
    tq = critic.forward_batch(as_values(samples_q))
    tp = critic.forward_batch(as_values(samples_p))
    return dv_objective(tq, tp, order)


def split(values: np.ndarray, train_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """First ``floor(f n)`` values train, the rest validate (all of them if f == 1)."""
    k = int(math.floor(train_fraction * values.size + 1e-9))
    if k >= values.size:
        return values, values
    return values[:k], values[k:]


def train(samples_q: SampleSet | Sequence[float], samples_p: SampleSet | Sequence[float], config: DvConfig) -> DvEstimate:
    """Fits a critic to lower-bound ``D_alpha(Q || P)``.

    Args:
      samples_q: draws from Q (the numerator distribution of the divergence).
      samples_p: draws from P.
      config: estimator hyperparameters.

    Returns:
      A :class:`DvEstimate` whose ``d_hat`` estimates ``D_alpha(Q||P)``.

    Raises:
      ValueError: if either training split is smaller than the batch size.
      TrainingError: if the objective becomes non-finite.
    """
    alpha = config.alpha
    q_all, p_all = as_values(samples_q), as_values(samples_p)
    q_train, q_val = split(q_all, config.train_fraction)
    p_train, p_val = split(p_all, config.train_fraction)
    b = config.batch_size
    if q_train.size < b or p_train.size < b:
        raise ValueError(
            f"insufficient samples: training splits have {q_train.size} (Q) and "
            f"{p_train.size} (P) values, batch size is {b}"
        )

    critic = CriticNetwork.init(config.seed, config.layer_sizes, config.clamp_bound, config.param_radius)
    if config.standardize:
        pooled = np.concatenate([q_train, p_train])
        scale = float(np.std(pooled))
        critic.input_shift = float(np.mean(pooled))
        critic.input_scale = scale if scale > 0 else 1.0

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    batches = min(q_train.size, p_train.size) // b
    log_b = math.log(b)
    log_decay, log_fresh = math.log(config.ema_rate), math.log1p(-config.ema_rate)
    log_m_q = log_m_p = None
    trace = []
    for epoch in range(config.epochs):
        perm_q = rng.permutation(q_train.size)
        perm_p = rng.permutation(p_train.size)
        epoch_values = []
        for j in range(batches):
            xq = q_train[perm_q[j * b : (j + 1) * b]]
            yp = p_train[perm_p[j * b : (j + 1) * b]]
            batch = critic._as_batch(np.concatenate([xq, yp]))
            out, acts = critic._forward_cache(batch)
            eq = (alpha - 1.0) * out[:b]
            ep = alpha * out[b:]
            lm_q = float(logsumexp(eq)) - log_b
            lm_p = float(logsumexp(ep)) - log_b
            value = lm_q / (alpha - 1.0) - lm_p / alpha
            if not math.isfinite(value):
                raise TrainingError(f"objective became non-finite in epoch {epoch}", epoch=epoch)
            epoch_values.append(value)
            if log_m_q is None:
                log_m_q, log_m_p = lm_q, lm_p
            else:
                log_m_q = float(np.logaddexp(log_decay + log_m_q, log_fresh + lm_q))
                log_m_p = float(np.logaddexp(log_decay + log_m_p, log_fresh + lm_p))
            weights = np.concatenate([np.exp(eq - log_m_q), -np.exp(ep - log_m_p)]) / b
            grad = critic._backward(out, acts, weights)
            critic.apply_update(grad, config.step_size)
        trace.append(float(np.mean(epoch_values)))

    r_hat = evaluate(critic, q_val, p_val, alpha)
    if not math.isfinite(r_hat):
        raise TrainingError("validation objective is non-finite", epoch=config.epochs - 1)
    return DvEstimate(
        r_hat=r_hat,
        d_hat=alpha * r_hat,
        objective_trace=tuple(trace),
        critic=critic,
        config=config,
        n_train=(q_train.size, p_train.size),
        n_validation=(q_val.size, p_val.size),
    )
