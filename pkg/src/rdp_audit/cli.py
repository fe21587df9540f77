"""Command-line interface: ``rdp-audit <command> [flags]``.

Commands: estimate, audit, simulate, convert, plan, minimax-check.

Settings may also come from a JSON config file (``--config`` or the
``RDP_AUDIT_CONFIG`` environment variable). File keys are the long flag
names without the leading dashes; a nested object keyed by the command name
applies to that command only. Flags override the file.

Exit codes:
  0   success (for ``audit``: the claim was not rejected)
  1   a verification check failed (``minimax-check``)
  2   usage, configuration or input error
  3   estimation failure (the critic's objective diverged)
  4   infeasible request (planner target, minimax instance)
  10  ``audit`` rejected the claimed guarantee
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections.abc import Callable, Sequence

import numpy as np

from rdp_audit import __version__, accounting, audit, bounds, minimax
from rdp_audit._io import read_loss_file, write_atomic, write_loss_file
from rdp_audit.divergence import SampleSet, plugin_estimate, renyi_bernoulli, renyi_gaussian
from rdp_audit.dv_estimator import DvConfig, train
from rdp_audit.exceptions import ConstructionError, InfeasibleError, TrainingError
from rdp_audit.mechanisms import (
    DpSgdConfig,
    GaussianMechanismSpec,
    bernoulli_channel_samples,
    gaussian_pair_samples,
)

CONFIG_ENV = "RDP_AUDIT_CONFIG"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_ESTIMATION = 3
EXIT_INFEASIBLE = 4
EXIT_REJECT = 10


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Six significant digits for terminal output."""
    if x is None:
        return "n/a"
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def _err(msg: str) -> None:
    print(f"rdp-audit: {msg}", file=sys.stderr)


def _floats(text: str, count: int | None = None, what: str = "value") -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"{what} needs {count} comma-separated numbers, got {text!r}")
    return vals


def _class_spec(text: str | None) -> bounds.CriticClassSpec | None:
    if text is None:
        return None
    d, K, M = _floats(text, 3, "--class-spec")
    if d != int(d):
        raise UsageError("--class-spec d must be an integer")
    try:
        return bounds.CriticClassSpec(int(d), K, M)
    except ValueError as exc:
        raise UsageError(f"--class-spec: {exc}") from None


class _Options:
    """Flag registry that tracks defaults separately from parsed values."""

    def __init__(self, parser: argparse.ArgumentParser):
        self.parser = parser
        self.defaults: dict[str, object] = {}
        self.types: dict[str, Callable] = {}

    def add(self, flag: str, type=str, default=None, help="", **kw):
        dest = flag.lstrip("-").replace("-", "_")
        self.defaults[dest] = default
        if kw.get("action") in ("store_true", "store_false"):
            self.types[dest] = _as_bool
            self.parser.add_argument(flag, dest=dest, default=argparse.SUPPRESS, help=help, **kw)
        else:
            self.types[dest] = type
            self.parser.add_argument(flag, dest=dest, type=type, default=argparse.SUPPRESS, help=help, **kw)


def _as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "1", "yes"):
        return True
    if isinstance(v, str) and v.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_float(v) -> float | None:
    if v is None or (isinstance(v, str) and v.strip().lower() in ("none", "off")):
        return None
    return float(v)


def _dv_flags(o: _Options) -> None:
    d = DvConfig()
    o.add("--alpha", float, d.alpha, "Renyi order (> 1 for audits)")
    o.add("--batch-size", int, d.batch_size, "critic minibatch size")
    o.add("--ema-rate", float, d.ema_rate, "EMA rate of the gradient denominators")
    o.add("--step-size", float, d.step_size, "gradient-ascent step size")
    o.add("--epochs", int, d.epochs, "training epochs")
    o.add("--train-fraction", float, d.train_fraction, "leading fraction of samples used for training")
    o.add("--clamp-bound", _opt_float, d.clamp_bound, "critic output bound M (smooth clamp); 'none' disables")
    o.add("--param-radius", _opt_float, d.param_radius, "critic parameter-ball radius K; 'none' disables")
    o.add("--hidden", str, ",".join(str(s) for s in d.layer_sizes[1:-1]), "hidden layer widths, comma separated")
    o.add("--no-standardize", action="store_true", default=False, help="feed raw observations to the critic")
    o.add("--seed", int, d.seed, "estimator seed")


def _dv_config(cfg: dict) -> DvConfig:
    hidden = [int(h) for h in str(cfg["hidden"]).split(",") if h.strip()] if cfg["hidden"] else []
    try:
        return DvConfig(
            alpha=cfg["alpha"],
            batch_size=cfg["batch_size"],
            ema_rate=cfg["ema_rate"],
            step_size=cfg["step_size"],
            epochs=cfg["epochs"],
            train_fraction=cfg["train_fraction"],
            seed=cfg["seed"],
            clamp_bound=cfg["clamp_bound"],
            param_radius=cfg["param_radius"],
            layer_sizes=(1, *hidden, 1),
            standardize=not cfg["no_standardize"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _dp_flags(o: _Options) -> None:
    d = DpSgdConfig()
    o.add("--iterations", int, d.iterations, "DP-SGD iterations")
    o.add("--clip", float, d.clip, "per-example clipping norm c")
    o.add("--noise-multiplier", float, d.noise_multiplier, "noise multiplier sigma")
    o.add("--sample-prob", float, d.sample_prob, "Poisson sampling probability q")
    o.add("--learning-rate", float, d.learning_rate, "DP-SGD learning rate")
    o.add("--paired-noise", action="store_true", default=False, help="share noise between runs with and without the canary")
    o.add("--task-n", int, 400, "synthetic task size")
    o.add("--task-seed", int, 0, "synthetic task seed")
    o.add("--warm-start-epochs", int, 0, "non-private pretraining epochs on the first half of the task")


def _dp_source(cfg: dict) -> audit.DpSgdSource:
    try:
        dp = DpSgdConfig(
            iterations=cfg["iterations"],
            clip=cfg["clip"],
            noise_multiplier=cfg["noise_multiplier"],
            sample_prob=cfg["sample_prob"],
            learning_rate=cfg["learning_rate"],
            paired_noise=cfg["paired_noise"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return audit.DpSgdSource(
        dp=dp, task_n=cfg["task_n"], task_seed=cfg["task_seed"], warm_start_epochs=cfg["warm_start_epochs"]
    )


def _gaussian_spec(text: str) -> GaussianMechanismSpec:
    without, with_, sigma = _floats(text, 3, "gaussian mechanism")
    try:
        return GaussianMechanismSpec(without, with_, sigma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parse_simulate(text: str) -> tuple[str, str]:
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind not in ("gaussian", "bernoulli", "dpsgd"):
        raise UsageError(f"unknown simulation {text!r} (use gaussian:a,b,sigma | bernoulli:tpr,fpr | dpsgd)")
    return kind, rest


# -- commands -----------------------------------------------------------------


def _setup_estimate(o: _Options) -> None:
    o.add("--q-file", str, None, "observations from Q (numerator distribution)")
    o.add("--p-file", str, None, "observations from P")
    o.add("--simulate", str, None, "gaussian:p_mean,q_mean,sigma or bernoulli:q_prob,p_prob")
    o.add("--n", int, 10000, "samples per side when simulating")
    o.add("--data-seed", int, 0, "simulation seed")
    o.add("--out", str, None, "report path (JSON)")
    o.add("--save-critic", str, None, "write the trained critic to this path")
    _dv_flags(o)


def cmd_estimate(cfg: dict) -> int:
    dv = _dv_config(cfg)
    info: dict = {}
    if cfg["simulate"]:
        if cfg["q_file"] or cfg["p_file"]:
            raise UsageError("use either --simulate or --q-file/--p-file")
        kind, rest = _parse_simulate(cfg["simulate"])
        if kind == "gaussian":
            spec = _gaussian_spec(rest)
            p, q = gaussian_pair_samples(spec, cfg["n"], cfg["data_seed"])
            info["true_divergence"] = renyi_gaussian(spec.value_with, spec.value_without, spec.sigma, dv.alpha)
            if dv.alpha > 1:
                mq, mp, s = spec.value_with, spec.value_without, spec.sigma
                # log(q/p) averaged over P draws gives the plug-in estimate of D(Q||P)
                log_ratio = lambda x: ((x - mp) ** 2 - (x - mq) ** 2) / (2 * s * s)  # noqa: E731
                d_plug, z_plug = plugin_estimate(p, log_ratio, dv.alpha)
                info["plugin"] = {"d_hat": d_plug, "z_hat": z_plug}
        elif kind == "bernoulli":
            q_prob, p_prob = _floats(rest, 2, "bernoulli channel")
            q, p = bernoulli_channel_samples(q_prob, p_prob, cfg["n"], cfg["data_seed"])
            info["true_divergence"] = renyi_bernoulli(q_prob, p_prob, dv.alpha)
        else:
            raise UsageError("estimate simulates gaussian or bernoulli sources; use audit for dpsgd")
        info["source"] = {"simulate": cfg["simulate"], "n": cfg["n"], "data_seed": cfg["data_seed"]}
    else:
        if not (cfg["q_file"] and cfg["p_file"]):
            raise UsageError("need --q-file and --p-file (or --simulate)")
        q_vals, q_digest = _read(cfg["q_file"])
        p_vals, p_digest = _read(cfg["p_file"])
        q, p = SampleSet(q_vals, "q"), SampleSet(p_vals, "p")
        info["source"] = {"q_file": cfg["q_file"], "p_file": cfg["p_file"], "sha256": [q_digest, p_digest]}
    try:
        est = train(q, p, dv)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = {
        "command": "estimate",
        "alpha": dv.alpha,
        "d_hat": est.d_hat,
        "r_hat": est.r_hat,
        "objective_trace": list(est.objective_trace),
        "n_train": list(est.n_train),
        "n_validation": list(est.n_validation),
        "dv_config": dv.to_dict(),
        "resolved_config": cfg,
        "package_version": __version__,
        **info,
    }
    print(f"alpha   {fmt(dv.alpha)}")
    print(f"d_hat   {fmt(est.d_hat)}")
    print(f"r_hat   {fmt(est.r_hat)}")
    if "true_divergence" in info:
        print(f"true    {fmt(info['true_divergence'])}")
    if "plugin" in info:
        print(f"plugin  {fmt(info['plugin']['d_hat'])}")
    if cfg["out"]:
        write_atomic(cfg["out"], _dumps(report))
    if cfg["save_critic"]:
        est.critic.save(cfg["save_critic"])
    return EXIT_OK


def _read(path: str):
    try:
        return read_loss_file(path)
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _setup_audit(o: _Options) -> None:
    o.add("--without-file", str, None, "canary losses from runs without the canary")
    o.add("--with-file", str, None, "canary losses from runs with the canary")
    o.add("--simulate", str, None, "dpsgd | gaussian:without,with,sigma")
    o.add("--trials", int, 500, "observations per side when simulating")
    o.add("--claim", str, None, "claimed guarantee: rdp:alpha,eps | gdp:mu | dp:eps,delta")
    o.add("--beta", float, 0.05, "test level (Markov correction)")
    o.add("--delta-ci", float, 0.05, "certificate failure probability")
    o.add("--delta", float, 1e-5, "delta for (eps, delta) translations")
    o.add("--class-spec", str, None, "d,K,M of the critic class; enables the certificate")
    o.add("--master-seed", int, 0, "root seed of simulated trials")
    o.add("--out", str, None, "report path (JSON)")
    _dv_flags(o)
    _dp_flags(o)


def _audit_config(cfg: dict) -> audit.AuditConfig:
    if not cfg["claim"]:
        raise UsageError("--claim is required")
    try:
        claimed = accounting.parse_guarantee(cfg["claim"])
    except ValueError as exc:
        raise UsageError(f"--claim: {exc}") from None
    dv = _dv_config(cfg)
    if cfg["simulate"]:
        if cfg["without_file"] or cfg["with_file"]:
            raise UsageError("use either --simulate or --without-file/--with-file")
        kind, rest = _parse_simulate(cfg["simulate"])
        if kind == "gaussian":
            source = audit.GaussianSource(_gaussian_spec(rest))
        elif kind == "dpsgd":
            source = _dp_source(cfg)
        else:
            raise UsageError("audit simulates dpsgd or gaussian sources")
    elif cfg["without_file"] and cfg["with_file"]:
        for path in (cfg["without_file"], cfg["with_file"]):
            if not os.path.exists(path):
                raise UsageError(f"file not found: {path}")
        source = audit.FileSource(cfg["without_file"], cfg["with_file"])
    else:
        raise UsageError("need --without-file and --with-file, or --simulate")
    try:
        return audit.AuditConfig(
            claimed=claimed,
            source=source,
            trials=cfg["trials"],
            dv=dv,
            beta=cfg["beta"],
            delta_ci=cfg["delta_ci"],
            class_spec=_class_spec(cfg["class_spec"]),
            master_seed=cfg["master_seed"],
            delta=cfg["delta"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_audit(cfg: dict) -> int:
    config = _audit_config(cfg)
    try:
        report = audit.run_audit(config)
    except (InfeasibleError, ValueError) as exc:
        if isinstance(exc, TrainingError):
            raise
        raise UsageError(str(exc)) from None
    if cfg["out"]:
        report.save(cfg["out"])
    dec = report.decision
    print(f"alpha                  {fmt(report.alpha)}")
    for label, value in report.per_direction.items():
        print(f"d_hat[{label}]{' ' * (16 - len(label))}{fmt(value)}")
    print(f"eps_hat                {fmt(report.eps_hat)}")
    print(f"markov_lcb             {fmt(report.markov_lcb)}")
    print(f"dv_lcb                 {fmt(report.dv_lcb)}")
    print(f"claimed eps_alpha      {fmt(report.conversions['claimed_rdp']['eps_alpha'])}")
    print(f"sup rejectable eps     {fmt(dec.sup_rejectable_epsilon)}")
    print(f"decision               {'REJECT' if dec.reject_null else 'fail to reject'}")
    return EXIT_REJECT if dec.reject_null else EXIT_OK


def _setup_simulate(o: _Options) -> None:
    o.add("--mechanism", str, "dpsgd", "dpsgd | gaussian:without,with,sigma | bernoulli:tpr,fpr")
    o.add("--trials", int, 500, "observations per side")
    o.add("--master-seed", int, 0, "root seed")
    o.add("--out-without", str, None, "loss file for runs without the canary")
    o.add("--out-with", str, None, "loss file for runs with the canary")
    _dp_flags(o)


def cmd_simulate(cfg: dict) -> int:
    if not (cfg["out_without"] and cfg["out_with"]):
        raise UsageError("need --out-without and --out-with")
    kind, rest = _parse_simulate(cfg["mechanism"])
    if cfg["trials"] < 1:
        raise UsageError("--trials must be positive")
    if kind == "gaussian":
        without, with_ = gaussian_pair_samples(_gaussian_spec(rest), cfg["trials"], cfg["master_seed"])
    elif kind == "bernoulli":
        tpr, fpr = _floats(rest, 2, "bernoulli channel")
        try:
            with_, without = bernoulli_channel_samples(tpr, fpr, cfg["trials"], cfg["master_seed"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        source = _dp_source(cfg)
        # AuditConfig validation needs a claim; simulation alone does not.
        stub = audit.AuditConfig(
            claimed=accounting.GDP(0.0), source=source, trials=cfg["trials"],
            dv=DvConfig(batch_size=1), master_seed=cfg["master_seed"],
        )
        without, with_, _ = audit.simulate_observations(stub)
    header = "rdp-audit simulate " + json.dumps(cfg, sort_keys=True)
    write_loss_file(cfg["out_without"], without.values, header)
    write_loss_file(cfg["out_with"], with_.values, header)
    print(f"wrote {len(without)} observations per side")
    print(f"mean without  {fmt(np.mean(without.values))}")
    print(f"mean with     {fmt(np.mean(with_.values))}")
    return EXIT_OK


def _setup_convert(o: _Options) -> None:
    o.parser.add_argument("guarantee", help="rdp:alpha,eps | gdp:mu | dp:eps,delta")
    o.add("--to", str, "all", "rdp | dp | gdp | group | all")
    o.add("--alpha", float, None, "target RDP order (default: 2 and 1.25)")
    o.add("--delta", float, 1e-5, "target delta for (eps, delta)-DP")
    o.add("--group-c", int, None, "group privacy exponent c (groups of 2**c)")


def cmd_convert(cfg: dict) -> int:
    try:
        g = accounting.parse_guarantee(cfg["guarantee"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    to = cfg["to"].lower()
    if to not in ("rdp", "dp", "gdp", "group", "all"):
        raise UsageError(f"--to must be rdp, dp, gdp, group or all, got {to!r}")
    alphas = [cfg["alpha"]] if cfg["alpha"] is not None else [2.0, 1.25]
    delta = cfg["delta"]
    rows: list[tuple[str, str, str]] = []
    try:
        if to in ("rdp", "all"):
            for a in alphas:
                r, steps = accounting.to_rdp(g, a)
                rows.append(("rdp", f"alpha={fmt(a)} eps_alpha={fmt(r.eps_alpha)}", " ; ".join(steps) or "identity"))
        if to in ("dp", "all"):
            if isinstance(g, accounting.GDP):
                eps = _gdp_eps_for_delta(g, delta)
                rows.append(("dp", f"eps={fmt(eps)} delta={fmt(delta)}", "gdp_to_approx_dp_delta (inverted in eps)"))
            for a in alphas if not isinstance(g, accounting.ApproxDP) else []:
                r, steps = accounting.to_rdp(g, a)
                dp = accounting.rdp_to_approx_dp(r, delta)
                rows.append(("dp", f"eps={fmt(dp.eps)} delta={fmt(delta)}", " ; ".join([*steps, f"rdp_to_approx_dp(alpha={fmt(a)})"])))
        if to in ("gdp", "all"):
            if isinstance(g, accounting.ApproxDP):
                mu = accounting.approx_dp_to_gdp(g.eps, g.delta)
                rows.append(("gdp", f"mu={fmt(mu.mu)}", "approx_dp_to_gdp"))
            elif isinstance(g, accounting.GDP):
                rows.append(("gdp", f"mu={fmt(g.mu)}", "identity"))
            elif to == "gdp":
                raise UsageError("an RDP claim does not determine a GDP parameter")
        if to == "group" or (to == "all" and cfg["group_c"] is not None):
            if cfg["group_c"] is None:
                raise UsageError("--to group needs --group-c")
            base = g if isinstance(g, accounting.RDP) else accounting.to_rdp(g, alphas[0])[0]
            r = accounting.group_privacy(base, cfg["group_c"])
            rows.append(("group", f"alpha={fmt(r.alpha)} eps_alpha={fmt(r.eps_alpha)}", f"group_privacy(c={cfg['group_c']})"))
    except InfeasibleError as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"source  {cfg['guarantee']}")
    for kind, value, how in rows:
        print(f"{kind:<6}  {value:<36}  via {how}")
    return EXIT_OK


def _gdp_eps_for_delta(g: accounting.GDP, delta: float) -> float:
    """Smallest eps with delta(eps) <= delta on the mu-GDP curve (bisection)."""
    if g.mu == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while accounting.gdp_to_approx_dp_delta(g, hi) > delta:
        hi *= 2.0
        if hi > 1e6:
            raise InfeasibleError("delta too small for this mu")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if accounting.gdp_to_approx_dp_delta(g, mid) > delta:
            lo = mid
        else:
            hi = mid
    return hi


def _setup_plan(o: _Options) -> None:
    o.add("--target-eps", float, None, "target confidence radius")
    o.add("--class-spec", str, None, "d,K,M of the critic class")
    o.add("--alpha", float, 2.0, "Renyi order")
    o.add("--delta-ci", float, 0.05, "failure probability")


def cmd_plan(cfg: dict) -> int:
    if cfg["target_eps"] is None or cfg["class_spec"] is None:
        raise UsageError("need --target-eps and --class-spec")
    spec = _class_spec(cfg["class_spec"])
    try:
        n_upper, n_floor = bounds.required_samples(cfg["target_eps"], spec, cfg["alpha"], cfg["delta_ci"])
    except ValueError as exc:
        if isinstance(exc, InfeasibleError):
            raise
        raise UsageError(str(exc)) from None
    print(f"n_upper        {n_upper}")
    print(f"n_floor        {n_floor}")
    print(f"C_alpha_M      {fmt(bounds.dv_constant(cfg['alpha'], spec.M))}")
    print(f"constant_factor {fmt(bounds.DV_CONSTANT_FACTOR)}")
    print(f"floor_constant {fmt(bounds.MINIMAX_FLOOR_CONSTANT)} (order of magnitude only)")
    return EXIT_OK


def _setup_minimax(o: _Options) -> None:
    o.add("--d", int, 8, "dimension (even, >= 8)")
    o.add("--alpha", float, 2.0, "Renyi order")
    o.add("--delta", float, 0.25, "signal strength delta in (0, 1/2]")
    o.add("--tau", float, minimax.DEFAULT_TAU, "critic scale tau in (0, 1]")
    o.add("--seed", int, 0, "packing seed")
    o.add("--target-count", int, 64, "packing size to aim for")
    o.add("--out", str, None, "report path (JSON)")


def cmd_minimax_check(cfg: dict) -> int:
    try:
        packing = minimax.build_balanced_packing(cfg["d"], cfg["target_count"], cfg["seed"])
        instance = minimax.PackingInstance(packing, cfg["delta"], cfg["tau"])
    except ValueError as exc:
        if isinstance(exc, InfeasibleError):
            raise
        raise UsageError(str(exc)) from None
    result = minimax.check_instance(instance, cfg["alpha"])
    print(f"d                {cfg['d']}")
    print(f"codewords        {result['codewords']}  (draws {packing.attempts})")
    print(f"separation_gap   {fmt(result['separation_gap'])}")
    print(f"decoding_margin  {fmt(result['decoding_margin'])}")
    print(f"c_alpha          {fmt(result['c_alpha'])}")
    print(f"kl range         [{fmt(result['kl_min'])}, {fmt(result['kl_max'])}]")
    print(f"max |V err|      {fmt(result['max_dv_error'])}")
    print(f"max |KL err|     {fmt(result['max_kl_error'])}")
    for name, ok in result["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if cfg["out"]:
        write_atomic(cfg["out"], _dumps({"command": "minimax-check", "resolved_config": cfg, **result}))
    return EXIT_OK if result["all_pass"] else EXIT_CHECK_FAILED


COMMANDS: dict[str, tuple[Callable, Callable, str]] = {
    "estimate": (_setup_estimate, cmd_estimate, "estimate D_alpha(Q||P) from two samples"),
    "audit": (_setup_audit, cmd_audit, "audit a privacy claim from canary losses"),
    "simulate": (_setup_simulate, cmd_simulate, "write simulated observation files"),
    "convert": (_setup_convert, cmd_convert, "convert between RDP, (eps, delta)-DP and GDP"),
    "plan": (_setup_plan, cmd_plan, "sample budget for a certificate radius"),
    "minimax-check": (_setup_minimax, cmd_minimax_check, "verify the hard instance's invariants"),
}


def _dumps(obj) -> str:
    return audit._dumps(obj, indent=2) + "\n"


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, _Options]]:
    parser = argparse.ArgumentParser(prog="rdp-audit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help=f"JSON config file (default: ${CONFIG_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)
    options = {}
    for name, (setup, _, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        o = _Options(p)
        setup(o)
        options[name] = o
    return parser, options


def _load_config_file(path: str | None, command: str, known: dict[str, Callable]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    merged = {k: v for k, v in data.items() if k not in COMMANDS}
    section = data.get(command, {})
    if not isinstance(section, dict):
        raise UsageError(f"config section {command!r} must be an object")
    merged.update(section)
    out = {}
    for key, value in merged.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise UsageError(f"config file {path}: unknown key {key!r} for {command}")
        try:
            out[dest] = None if value is None else known[dest](value if not isinstance(value, list) else ",".join(map(str, value)))
        except (TypeError, ValueError):
            raise UsageError(f"config file {path}: bad value for {key!r}: {value!r}") from None
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser, options = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config") or os.environ.get(CONFIG_ENV)
    o = options[command]
    try:
        from_file = _load_config_file(config_path, command, o.types)
        cfg = dict(o.defaults)
        cfg.update(from_file)
        for key, value in args.items():
            if key in from_file and from_file[key] != value:
                _err(f"note: flag --{key.replace('_', '-')} overrides config file value {from_file[key]!r}")
            cfg[key] = value
        print("resolved config: " + json.dumps({"command": command, **cfg}, sort_keys=True), file=sys.stderr)
        return COMMANDS[command][1](cfg)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except TrainingError as exc:
        _err(f"estimation failed: {exc}")
        return EXIT_ESTIMATION
    except (InfeasibleError, ConstructionError) as exc:
        _err(f"infeasible: {exc}")
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
