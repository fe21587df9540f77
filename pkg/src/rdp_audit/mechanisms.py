"""Sample generators with known or claimed privacy.

* a scalar Gaussian mechanism and a Bernoulli attack channel, both with
  closed-form Renyi divergences;
* a miniature DP-SGD (Poisson sampling, per-example clipping, Gaussian noise)
  on a two-blob logistic-regression task with an optional canary record.
"""

from __future__ import annotations

import dataclasses
import math
import os
from collections.abc import Sequence

import numpy as np

from rdp_audit._io import write_loss_file
from rdp_audit.divergence import SampleSet


@dataclasses.dataclass(frozen=True)
class GaussianMechanismSpec:
    """Query answers on two neighbouring datasets, released with N(0, sigma^2) noise."""

    value_without: float
    value_with: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def gaussian_pair_samples(spec: GaussianMechanismSpec, n: int, seed: int) -> tuple[SampleSet, SampleSet]:
    """``n`` releases on each neighbour: ``(without, with)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng_without, rng_with = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    without = rng_without.normal(spec.value_without, spec.sigma, n)
    with_ = rng_with.normal(spec.value_with, spec.sigma, n)
    return SampleSet(without, "gaussian-without"), SampleSet(with_, "gaussian-with")


def bernoulli_channel_samples(tpr: float, fpr: float, n: int, seed: int) -> tuple[SampleSet, SampleSet]:
    """Outputs of a binary distinguisher: ``n`` Bern(tpr) and ``n`` Bern(fpr) draws as 0.0/1.0."""
    if not (0.0 <= tpr <= 1.0 and 0.0 <= fpr <= 1.0):
        raise ValueError(f"tpr and fpr must lie in [0, 1], got {tpr}, {fpr}")
    if n < 1:
        raise ValueError("n must be at least 1")
    rng_pos, rng_neg = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    pos = (rng_pos.random(n) < tpr).astype(np.float64)
    neg = (rng_neg.random(n) < fpr).astype(np.float64)
    return SampleSet(pos, "bernoulli-tpr"), SampleSet(neg, "bernoulli-fpr")


def clip_gradient(g, c: float) -> np.ndarray:
    """``min(1, c / ||g||) g``; the zero vector is returned unchanged."""
    if not c > 0:
        raise ValueError(f"clip threshold must be positive, got {c}")
    g = np.asarray(g, dtype=np.float64)
    norm = float(np.linalg.norm(g))
    if norm <= c:
        return g.copy()
    return g * (c / norm)


def clip_rows(grads: np.ndarray, c: float) -> np.ndarray:
    """Row-wise :func:`clip_gradient` for a ``(n, d)`` array."""
    norms = np.linalg.norm(grads, axis=1)
    scale = np.ones_like(norms)
    big = norms > c
    scale[big] = c / norms[big]
    return grads * scale[:, None]


@dataclasses.dataclass(frozen=True)
class DpSgdConfig:
    """DP-SGD hyperparameters.

    Attributes:
      iterations: number of noisy steps.
      clip: per-example clipping threshold ``c``.
      noise_multiplier: ``sigma``; the summed gradient gets N(0, sigma^2 c^2 I).
      sample_prob: Poisson inclusion probability ``q`` (1.0 = full batch).
      learning_rate: step size ``eta``.
      init: starting parameters, or None for zeros.
      seed: root of the run's random streams.
      paired_noise: if True, runs with and without the canary share their
        sampling and noise streams; if False they are independent.
    """

    iterations: int = 1
    clip: float = 0.1
    noise_multiplier: float = 1.0
    sample_prob: float = 1.0
    learning_rate: float = 1.0
    init: tuple[float, ...] | None = None
    seed: int = 0
    paired_noise: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not self.clip > 0:
            raise ValueError("clip must be positive")
        if not self.noise_multiplier > 0:
            raise ValueError("noise_multiplier must be positive")
        if not 0.0 < self.sample_prob <= 1.0:
            raise ValueError("sample_prob must lie in (0, 1]")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.init is not None:
            object.__setattr__(self, "init", tuple(float(v) for v in self.init))

    def replace(self, **changes) -> DpSgdConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["init"] = None if self.init is None else list(self.init)
        return d


@dataclasses.dataclass(frozen=True)
class SyntheticTask:
    """Binary logistic regression data plus one canary record.

    Parameters are ``(w_1..w_k, b)``: one weight per feature, bias last.
    """

    features: np.ndarray
    labels: np.ndarray
    canary_x: np.ndarray
    canary_y: float

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("features must be a nonempty (n, k) array")
        y = np.array(self.labels, dtype=np.float64).reshape(-1)
        if y.size != x.shape[0]:
            raise ValueError(f"{y.size} labels for {x.shape[0]} feature rows")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        cx = np.array(self.canary_x, dtype=np.float64).reshape(-1)
        if cx.size != x.shape[1]:
            raise ValueError(f"canary has {cx.size} features, dataset has {x.shape[1]}")
        if self.canary_y not in (0, 1):
            raise ValueError("canary label must be 0 or 1")
        for arr in (x, y, cx):
            arr.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "canary_x", cx)
        object.__setattr__(self, "canary_y", float(self.canary_y))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def num_params(self) -> int:
        return self.features.shape[1] + 1

    def halves(self) -> tuple[SyntheticTask, SyntheticTask]:
        """``(pretraining part, private part)``: first and second half of the rows."""
        if self.n < 2:
            raise ValueError("need at least two records to split")
        k = self.n // 2
        first = SyntheticTask(self.features[:k], self.labels[:k], self.canary_x, self.canary_y)
        second = SyntheticTask(self.features[k:], self.labels[k:], self.canary_x, self.canary_y)
        return first, second


def make_synthetic_task(n: int = 400, dim: int = 2, separation: float = 2.0, seed: int = 0) -> SyntheticTask:
    """Two unit-variance Gaussian blobs with centres at ``-+separation/2`` on every axis.

    Labels alternate so both halves of the dataset are balanced. The canary
    is the blank record: all-zero features with label 1.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    centres = (labels[:, None] - 0.5) * separation * np.ones(dim)
    features = centres + rng.standard_normal((n, dim))
    return SyntheticTask(features, labels.astype(np.float64), np.zeros(dim), 1.0)


def _logits(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    return x @ w[:-1] + w[-1]


def logistic_loss(w, x, y) -> np.ndarray:
    """``log(1 + e^z) - y z`` with ``z = w . x + b``, for one row or a batch."""
    w = np.asarray(w, dtype=np.float64)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    z = _logits(w, x)
    return np.logaddexp(0.0, z) - np.asarray(y, dtype=np.float64) * z


def per_example_gradients(w: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Rows ``(sigmoid(z_i) - y_i) (x_i, 1)``."""
    z = _logits(w, x)
    r = 0.5 * (1.0 + np.tanh(0.5 * z)) - y
    return np.hstack([x * r[:, None], r[:, None]])


def poisson_sample(rng: np.random.Generator, n: int, q: float) -> np.ndarray:
    """Boolean inclusion mask, each index independently with probability ``q``."""
    if q >= 1.0:
        return np.ones(n, dtype=bool)
    return rng.random(n) < q


def _streams(key: Sequence[int], include_canary: bool, paired: bool):
    # Paired runs share every stream; the canary's own inclusion coin has its
    # own stream so the dataset indices see identical draws either way.
    entropy = list(key) if paired else [*key, int(include_canary)]
    return [np.random.default_rng(s) for s in np.random.SeedSequence(entropy).spawn(3)]


def dp_sgd_train(
    task: SyntheticTask,
    config: DpSgdConfig,
    include_canary: bool,
    stream_key: Sequence[int] | None = None,
) -> tuple[np.ndarray, float]:
    """Runs DP-SGD and returns ``(final_params, canary_loss)``.

    Each iteration Poisson-samples the records (the canary, when present, is
    one more record), clips per-example gradients to ``c``, adds
    N(0, sigma^2 c^2 I) to their sum and takes a step of size ``eta``.

    Args:
      task: dataset and canary.
      config: DP-SGD hyperparameters.
      include_canary: train on the dataset with the canary appended.
      stream_key: integers seeding the run's streams; defaults to
        ``(config.seed,)``. Audits pass ``(master_seed, trial)``.
    """
    d = task.num_params
    if config.init is None:
        w = np.zeros(d)
    else:
        w = np.array(config.init, dtype=np.float64)
        if w.size != d:
            raise ValueError(f"init has {w.size} parameters, task needs {d}")
    key = (config.seed,) if stream_key is None else tuple(int(k) for k in stream_key)
    rng_sample, rng_noise, rng_canary = _streams(key, include_canary, config.paired_noise)
    x, y = task.features, task.labels
    cx, cy = task.canary_x[None, :], np.array([task.canary_y])
    c, q = config.clip, config.sample_prob
    noise_scale = config.noise_multiplier * c
    for _ in range(config.iterations):
        mask = poisson_sample(rng_sample, task.n, q)
        canary_in = include_canary and bool(poisson_sample(rng_canary, 1, q)[0])
        total = clip_rows(per_example_gradients(w, x[mask], y[mask]), c).sum(axis=0)
        if canary_in:
            total = total + clip_rows(per_example_gradients(w, cx, cy), c)[0]
        noise = rng_noise.normal(0.0, noise_scale, d)
        w = w - config.learning_rate * (total + noise)
    canary_loss = float(logistic_loss(w, task.canary_x, task.canary_y)[0])
    return w, canary_loss


def warm_start_params(
    task: SyntheticTask, epochs: int, lr: float, seed: int, batch_size: int = 32
) -> np.ndarray:
    """Non-private minibatch SGD on the first half of the data.

    Mirrors worst-case-initialization pretraining at desk scale: the
    private phase should then run on ``task.halves()[1]``. Returns zeros for
    ``epochs == 0``.
    """
    if epochs < 0:
        raise ValueError("epochs must be nonnegative")
    part, _ = task.halves()
    w = np.zeros(task.num_params)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(part.n)
        for start in range(0, part.n, batch_size):
            idx = order[start : start + batch_size]
            g = per_example_gradients(w, part.features[idx], part.labels[idx]).mean(axis=0)
            w = w - lr * g
    return w


def gaussian_step_divergence(config: DpSgdConfig, order: float) -> float:
    """D_alpha between single full-batch steps whose sums differ by a full clip norm.

    This is ``alpha / (2 sigma^2)``, exact for one iteration with ``q = 1``
    when the canary's gradient is clipped and the rest of the update is
    identical across the two runs.
    """
    return float(order) / (2.0 * config.noise_multiplier**2)


def export_observations(
    without: SampleSet, with_: SampleSet, path_without: str | os.PathLike, path_with: str | os.PathLike,
    header: str = "",
) -> None:
    """Writes the two observation sets in the loss-file format."""
    write_loss_file(path_without, without.values, header)
    write_loss_file(path_with, with_.values, header)


def noise_for_mu(mu: float, steps: int = 1) -> float:
    """Noise multiplier giving ``mu``-GDP for ``steps`` full-batch releases.

    Each release is ``1/sigma``-GDP and composition adds in quadrature, so
    ``sigma = sqrt(steps) / mu``.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    return math.sqrt(steps) / mu
