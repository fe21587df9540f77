"""Black-box audit pipeline.

Collect canary losses from runs with and without the canary, estimate the
Renyi divergence in both directions with the variational estimator, keep
the larger value, and attach confidence bounds and a test of the claimed
guarantee. Reports are plain JSON so they can be diffed and replayed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from typing import Union

import numpy as np

import rdp_audit
from rdp_audit import accounting, bounds
from rdp_audit._io import read_loss_file, write_atomic
from rdp_audit.divergence import SampleSet, renyi_gaussian, require_standard
from rdp_audit.dv_estimator import DvConfig, DvEstimate, train
from rdp_audit.exceptions import AuditError, TrainingError
from rdp_audit.mechanisms import (
    DpSgdConfig,
    GaussianMechanismSpec,
    SyntheticTask,
    dp_sgd_train,
    gaussian_pair_samples,
    make_synthetic_task,
    warm_start_params,
)

DIRECTIONS = ("without||with", "with||without")


@dataclasses.dataclass(frozen=True)
class DpSgdSource:
    """Simulate the canary audit on the synthetic logistic task."""

    dp: DpSgdConfig = dataclasses.field(default_factory=DpSgdConfig)
    task_n: int = 400
    task_dim: int = 2
    task_separation: float = 2.0
    task_seed: int = 0
    warm_start_epochs: int = 0
    warm_start_lr: float = 0.1

    kind = "dpsgd"

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["dp"] = self.dp.to_dict()
        return {"kind": self.kind, **d}


@dataclasses.dataclass(frozen=True)
class GaussianSource:
    """Observations from a scalar Gaussian mechanism with known divergence."""

    spec: GaussianMechanismSpec

    kind = "gaussian"

    def to_dict(self) -> dict:
        return {"kind": self.kind, **dataclasses.asdict(self.spec)}


@dataclasses.dataclass(frozen=True)
class FileSource:
    """Observations read from two loss files."""

    path_without: str
    path_with: str

    kind = "files"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "path_without": self.path_without, "path_with": self.path_with}


Source = Union[DpSgdSource, GaussianSource, FileSource]


@dataclasses.dataclass(frozen=True)
class AuditConfig:
    """Everything needed to run (and re-run) an audit.

    Attributes:
      claimed: the guarantee under test.
      source: where observations come from.
      trials: observations per side when simulating.
      dv: estimator settings; its ``alpha`` is the audit order.
      beta: level of the Markov-corrected test.
      delta_ci: failure probability of the covering-number certificate.
      class_spec: critic-class description; enables the certificate and
        caps the critic's clamp and radius at ``M`` and ``K``.
      master_seed: root of every simulation stream.
      delta: delta used when translating bounds to (eps, delta)-DP; an
        (eps, delta) claim supplies its own.
    """

    claimed: accounting.PrivacyGuarantee
    source: Source
    trials: int = 500
    dv: DvConfig = dataclasses.field(default_factory=DvConfig)
    beta: float = 0.05
    delta_ci: float = 0.05
    class_spec: bounds.CriticClassSpec | None = None
    master_seed: int = 0
    delta: float = 1e-5

    def __post_init__(self):
        require_standard(self.dv.alpha)
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.delta_ci < 1.0:
            raise ValueError("delta_ci must lie in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not isinstance(self.source, FileSource):
            need = math.ceil(self.dv.batch_size / self.dv.train_fraction - 1e-9)
            if self.trials < need:
                raise ValueError(
                    f"trials={self.trials} is too few: each side needs at least "
                    f"batch_size / train_fraction = {need} observations"
                )

    @property
    def alpha(self) -> float:
        return self.dv.alpha

    def to_dict(self) -> dict:
        return {
            "claimed": accounting.guarantee_to_dict(self.claimed),
            "source": self.source.to_dict(),
            "trials": self.trials,
            "dv": self.dv.to_dict(),
            "beta": self.beta,
            "delta_ci": self.delta_ci,
            "class_spec": None if self.class_spec is None else dataclasses.asdict(self.class_spec),
            "master_seed": self.master_seed,
            "delta": self.delta,
        }

    def config_hash(self) -> str:
        return hashlib.sha256(_dumps(self.to_dict()).encode("utf-8")).hexdigest()


@dataclasses.dataclass(frozen=True)
class RdpEstimate:
    """Both directional estimates and their maximum."""

    eps_hat: float
    per_direction: tuple[float, float]
    argmax_direction: str
    estimates: tuple[DvEstimate, DvEstimate]
    seeds: tuple[int, int]


@dataclasses.dataclass(frozen=True)
class AuditReport:
    alpha: float
    eps_hat: float
    per_direction: dict
    markov_lcb: float
    dv_lcb: float | None
    dv_certificate: dict | None
    decision: bounds.AuditDecision
    claimed: dict
    conversions: dict
    provenance: dict

    @property
    def reject(self) -> bool:
        return self.decision.reject_null

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "eps_hat": self.eps_hat,
            "per_direction": self.per_direction,
            "markov_lcb": self.markov_lcb,
            "dv_lcb": self.dv_lcb,
            "dv_certificate": self.dv_certificate,
            "decision": dataclasses.asdict(self.decision),
            "claimed": self.claimed,
            "conversions": self.conversions,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return _dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path: str | os.PathLike) -> None:
        write_atomic(path, self.to_json())


def _dumps(obj, indent: int | None = None) -> str:
    return json.dumps(_finite(obj), indent=indent, sort_keys=True, allow_nan=False)


def _finite(obj):
    # JSON has no infinities; spell them out so reports stay parseable.
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


def collect_observations(
    task: SyntheticTask, dp_config: DpSgdConfig, trials: int, master_seed: int
) -> tuple[SampleSet, SampleSet]:
    """Canary losses from ``trials`` runs without (O) and with (O') the canary.

    Trial ``t`` seeds its streams from ``(master_seed, t)``; whether the two
    runs of a trial share noise is controlled by ``dp_config.paired_noise``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    without = np.empty(trials)
    with_ = np.empty(trials)
    for t in range(trials):
        key = (master_seed, t)
        try:
            _, without[t] = dp_sgd_train(task, dp_config, False, key)
            _, with_[t] = dp_sgd_train(task, dp_config, True, key)
        except (ValueError, FloatingPointError) as exc:
            raise AuditError(f"trial {t}: {exc}") from exc
    return SampleSet(without, "canary-out"), SampleSet(with_, "canary-in")


def estimate_rdp(without: SampleSet, with_: SampleSet, dv_config: DvConfig) -> RdpEstimate:
    """Trains the estimator in both orders and keeps the larger divergence.

    Both directions use ``dv_config.seed``. Each ordered pair is then trained
    the same way whichever argument it arrives in, so swapping the inputs
    swaps ``per_direction`` and leaves ``eps_hat`` unchanged.

    Raises:
      TrainingError: if either direction diverges; ``.direction`` names it.
    """
    seeds = (dv_config.seed, dv_config.seed)
    pairs = ((without, with_), (with_, without))
    estimates = []
    for label, seed, (q, p) in zip(DIRECTIONS, seeds, pairs):
        try:
            estimates.append(train(q, p, dv_config.replace(seed=seed)))
        except TrainingError as exc:
            raise TrainingError(f"direction {label}: {exc}", epoch=exc.epoch, direction=label) from exc
    values = (estimates[0].d_hat, estimates[1].d_hat)
    k = int(values[1] > values[0])
    return RdpEstimate(max(values), values, DIRECTIONS[k], tuple(estimates), seeds)


def ingest_losses(path_without: str | os.PathLike, path_with: str | os.PathLike):
    """Reads two loss files.

    Returns:
      ``(without, with, digests)`` where digests maps each path to its sha256.
    """
    values_without, digest_without = read_loss_file(path_without)
    values_with, digest_with = read_loss_file(path_with)
    digests = {os.fspath(path_without): digest_without, os.fspath(path_with): digest_with}
    return SampleSet(values_without, "canary-out"), SampleSet(values_with, "canary-in"), digests


def simulate_observations(config: AuditConfig) -> tuple[SampleSet, SampleSet, dict]:
    """Observations for a simulated source, plus source provenance."""
    src = config.source
    if isinstance(src, GaussianSource):
        without, with_ = gaussian_pair_samples(src.spec, config.trials, config.master_seed)
        return without, with_, {"true_divergence": renyi_gaussian(src.spec.value_with, src.spec.value_without, src.spec.sigma, config.alpha)}
    if isinstance(src, DpSgdSource):
        task = make_synthetic_task(src.task_n, src.task_dim, src.task_separation, src.task_seed)
        dp = src.dp
        if src.warm_start_epochs > 0:
            init = warm_start_params(task, src.warm_start_epochs, src.warm_start_lr, src.task_seed)
            task = task.halves()[1]
            dp = dp.replace(init=tuple(float(v) for v in init))
        without, with_ = collect_observations(task, dp, config.trials, config.master_seed)
        return without, with_, {"dp_sgd_init": None if dp.init is None else list(dp.init)}
    raise TypeError(f"not a simulated source: {src!r}")


def load_observations(config: AuditConfig) -> tuple[SampleSet, SampleSet, dict]:
    if isinstance(config.source, FileSource):
        without, with_, digests = ingest_losses(config.source.path_without, config.source.path_with)
        return without, with_, {"file_sha256": digests}
    return simulate_observations(config)


def _certified_dv_config(config: AuditConfig) -> DvConfig:
    spec, dv = config.class_spec, config.dv
    if spec is None:
        return dv
    n_params = sum(a * b + b for a, b in zip(dv.layer_sizes[:-1], dv.layer_sizes[1:]))
    if spec.d != n_params:
        raise ValueError(
            f"class spec d={spec.d} does not match the critic, which has {n_params} parameters "
            f"for layer sizes {list(dv.layer_sizes)}"
        )
    # The certificate covers critics inside the declared class, so the
    # trained critic is capped at the class bounds.
    return dv.replace(
        clamp_bound=spec.M if dv.clamp_bound is None else min(dv.clamp_bound, spec.M),
        param_radius=spec.K if dv.param_radius is None else min(dv.param_radius, spec.K),
    )


def run_audit(
    config: AuditConfig, observations: tuple[SampleSet, SampleSet] | None = None
) -> AuditReport:
    """Runs the full audit.

    Args:
      config: audit configuration.
      observations: optional pre-collected ``(without, with)`` sets; when
        given they replace the configured source (the provenance still
        records the source).

    Raises:
      ValueError: if the claim cannot be stated at the audit order, or the
        class spec disagrees with the critic.
      TrainingError: if the estimator diverges.
    """
    alpha = config.alpha
    claimed_rdp, steps = accounting.to_rdp(config.claimed, alpha)
    dv = _certified_dv_config(config)

    source_info: dict = {}
    if observations is None:
        without, with_, source_info = load_observations(config)
    else:
        without, with_ = observations

    est = estimate_rdp(without, with_, dv)
    eps_hat = est.eps_hat
    markov = bounds.markov_lower_bound(eps_hat, alpha, config.beta)
    decision = bounds.hypothesis_test(eps_hat, claimed_rdp.eps_alpha, alpha, config.beta)

    delta = config.claimed.delta if isinstance(config.claimed, accounting.ApproxDP) else config.delta
    conversions = {
        "claimed_rdp": {"alpha": claimed_rdp.alpha, "eps_alpha": claimed_rdp.eps_alpha, "steps": steps},
        "delta": delta,
        "claimed_dp_eps": accounting.rdp_to_approx_dp(claimed_rdp, delta).eps,
        "markov_violation_eps": bounds.violation_epsilon(markov.lower, alpha, delta),
    }

    dv_lcb = certificate = None
    if config.class_spec is not None:
        k = 0 if est.argmax_direction == DIRECTIONS[0] else 1
        n = min(est.estimates[k].n_validation)
        radius = bounds.dv_ci_radius(n, config.class_spec, alpha, config.delta_ci)
        cert = bounds.dv_certificate(est.estimates[k].r_hat, radius, config.delta_ci)
        dv_lcb = alpha * cert.lower
        certificate = {
            "r_hat": est.estimates[k].r_hat,
            "radius": radius,
            "lcb_variational": cert.lower,
            "ucb_variational": cert.upper,
            "n": n,
            "constant": bounds.dv_constant(alpha, config.class_spec.M),
            "level": cert.level,
        }
        conversions["dv_violation_eps"] = bounds.violation_epsilon(dv_lcb, alpha, delta)

    per_direction = {label: value for label, value in zip(DIRECTIONS, est.per_direction)}
    provenance = {
        "package_version": rdp_audit.__version__,
        "config": config.to_dict(),
        "config_sha256": config.config_hash(),
        "master_seed": config.master_seed,
        "estimator_seeds": dict(zip(DIRECTIONS, est.seeds)),
        "argmax_direction": est.argmax_direction,
        "n_without": len(without),
        "n_with": len(with_),
        "n_train": dict(zip(DIRECTIONS, (list(e.n_train) for e in est.estimates))),
        "n_validation": dict(zip(DIRECTIONS, (list(e.n_validation) for e in est.estimates))),
        "r_hat": dict(zip(DIRECTIONS, (e.r_hat for e in est.estimates))),
        "final_objective": dict(zip(DIRECTIONS, (e.objective_trace[-1] for e in est.estimates))),
        "markov_applied_to": "dv estimate (max direction)",
        "dv_effective": dv.to_dict(),
        **source_info,
    }
    return AuditReport(
        alpha=alpha,
        eps_hat=eps_hat,
        per_direction=per_direction,
        markov_lcb=markov.lower,
        dv_lcb=dv_lcb,
        dv_certificate=certificate,
        decision=decision,
        claimed=accounting.guarantee_to_dict(config.claimed),
        conversions=conversions,
        provenance=provenance,
    )
