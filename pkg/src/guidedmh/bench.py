"""Benchmark harness: configs, kernel registry, experiment runner, tables.

A config is one YAML file with nested sections (experiment / target / kernels /
run / tuning / sweep).  Validation is strict: unknown keys anywhere are
rejected so a typo cannot silently run a different experiment.  Results land in
an output directory as one trace CSV + JSON sidecar per chain plus an
aggregate CSV per run (one per sweep value when sweeping); re-running the same
config with the same seed reproduces every aggregate byte-for-byte except the
wall-time-derived ess_per_sec column.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
import yaml

from .diagnostics import ess
from .errors import ConfigError
from .groups import Direction
from .kernels import ARFamily, BetaGammaFamily, ChiSquaredFamily
from .primitives import CholFactor, RngStream
from .samplers import (
    ChainTrace,
    GuidedMetropolisHaarKernel,
    MalaKernel,
    MetropolisHaarKernel,
    PlainMetropolisKernel,
    RandomWalkKernel,
    run_chain,
)
from .targets import (
    PoissonHierData,
    TargetModel,
    central_t_target,
    gamma_product_target,
    gaussian_target,
    gibbs_theta,
    hier_logpost_from_sums,
    load_design_csv,
    logistic_target,
    scaled_t_target,
    simulate_hier_data,
    simulate_logistic_data,
)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "validate_config",
    "run_experiment",
    "run_hier_chain",
    "emit_table",
    "AGGREGATE_COLUMNS",
]

log = logging.getLogger("guidedmh")

AGGREGATE_COLUMNS = ("kernel", "replication", "ess", "ess_per_sec",
                     "accept_rate", "mean_inner_tries", "direction_balance")

# kernel name -> (family tag or None, variant, needs gradient)
_KERNELS = {
    "rwm": (None, "rwm"),
    "mala": (None, "mala"),
    "pcn": ("ar", "plain"),
    "mpcn": ("ar", "haar"),
    "gmpcn": ("ar", "guided"),
    "bg-mh": ("betagamma", "plain"),
    "bg-mhh": ("betagamma", "haar"),
    "bg-gmh": ("betagamma", "guided"),
    "chisq-mh": ("chisq", "plain"),
    "chisq-mhh": ("chisq", "haar"),
    "chisq-gmh": ("chisq", "guided"),
}

_KERNEL_KEYS = {
    "rwm": {"scale"},
    "mala": {"scale"},
    "pcn": {"rho", "x0_offset"},
    "mpcn": {"rho", "x0_offset"},
    "gmpcn": {"rho", "x0_offset", "max_tries"},
    "bg-mh": {"rho", "k"},
    "bg-mhh": {"rho", "k"},
    "bg-gmh": {"rho", "k", "order", "max_tries"},
    "chisq-mh": {"rho", "L"},
    "chisq-mhh": {"rho", "L"},
    "chisq-gmh": {"rho", "L", "max_tries"},
}

_TARGET_KEYS = {
    "gaussian": {"dim", "mean_offset", "sd"},
    "gamma_product": {"dim", "shape", "rate"},
    "central_t": {"dim"},
    "scaled_t35": {"dim", "sigma_seed"},
    "logistic_synthetic": {"n", "dim", "seed", "prior_sd"},
    "logistic_csv": {"path", "standardize", "prior_sd"},
    "poisson_hier": {"alpha", "beta", "n_groups", "n_per_group", "data_seed"},
}

_POSITIVE_TARGETS = {"gamma_product", "poisson_hier"}
_GRADIENT_TARGETS = {"gaussian", "central_t", "logistic_synthetic", "logistic_csv"}
_AR_KERNELS = {"pcn", "mpcn", "gmpcn"}


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated experiment description."""

    name: str
    seed: int
    output: str
    target: dict
    kernels: tuple
    run: dict
    tuning: dict
    sweep: dict | None = None


def load_config(path) -> dict:
    """Read a YAML config file into a raw mapping (no validation yet)."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping of sections")
    return raw


def _need_mapping(node, where: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping")
    return node


def _reject_unknown(node: dict, allowed, where: str) -> None:
    unknown = set(node) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _get_int(node, key, where, default=None, minimum=None):
    v = node.get(key, default)
    if v is None:
        raise ConfigError(f"{where}.{key}: required")
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key}: expected an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}.{key}: must be >= {minimum}")
    return v


def _get_float(node, key, where, default=None, positive=False):
    v = node.get(key, default)
    if v is None:
        raise ConfigError(f"{where}.{key}: required")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number")
    v = float(v)
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key}: must be > 0")
    return v


def _get_str(node, key, where, default=None, choices=None):
    v = node.get(key, default)
    if v is None:
        raise ConfigError(f"{where}.{key}: required")
    if not isinstance(v, str):
        raise ConfigError(f"{where}.{key}: expected a string")
    if choices is not None and v not in choices:
        raise ConfigError(f"{where}.{key}: must be one of {sorted(choices)}")
    return v


def _get_bool(node, key, where, default):
    v = node.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{where}.{key}: expected true/false")
    return v


def _validate_kernel(idx: int, node) -> dict:
    where = f"kernels[{idx}]"
    node = _need_mapping(node, where)
    name = _get_str(node, "name", where, choices=set(_KERNELS))
    _reject_unknown(node, _KERNEL_KEYS[name] | {"name"}, where)
    spec = {"name": name}
    fam_tag, variant = _KERNELS[name]
    if fam_tag == "ar":
        rho = _get_float(node, "rho", where, default=0.5, positive=True)
        if rho > 1.0:
            raise ConfigError(f"{where}.rho: must be in (0, 1] for {name}")
        spec["rho"] = rho
        spec["x0_offset"] = _get_float(node, "x0_offset", where, default=0.0)
    elif fam_tag == "betagamma":
        rho = _get_float(node, "rho", where, default=0.5, positive=True)
        if rho >= 1.0:
            raise ConfigError(f"{where}.rho: must be in (0, 1) for {name}")
        spec["rho"] = rho
        spec["k"] = _get_float(node, "k", where, default=2.0, positive=True)
        if variant == "guided":
            spec["order"] = _get_str(node, "order", where, default="product",
                                     choices={"product", "mlex"})
    elif fam_tag == "chisq":
        rho = _get_float(node, "rho", where, default=0.5, positive=True)
        if rho >= 1.0:
            raise ConfigError(f"{where}.rho: must be in (0, 1) for {name}")
        spec["rho"] = rho
        spec["L"] = _get_int(node, "L", where, default=1, minimum=1)
    else:
        spec["scale"] = _get_float(node, "scale", where, positive=True)
    if variant == "guided":
        spec["max_tries"] = _get_int(node, "max_tries", where, default=1000, minimum=1)
    return spec


def _validate_target(node) -> dict:
    where = "target"
    node = _need_mapping(node, where)
    name = _get_str(node, "name", where, choices=set(_TARGET_KEYS))
    _reject_unknown(node, _TARGET_KEYS[name] | {"name"}, where)
    spec = {"name": name}
    if name == "gaussian":
        spec["dim"] = _get_int(node, "dim", where, default=10, minimum=1)
        spec["mean_offset"] = _get_float(node, "mean_offset", where, default=0.0)
        spec["sd"] = _get_float(node, "sd", where, default=1.0, positive=True)
    elif name == "gamma_product":
        spec["dim"] = _get_int(node, "dim", where, default=10, minimum=1)
        spec["shape"] = _get_float(node, "shape", where, default=2.0, positive=True)
        spec["rate"] = _get_float(node, "rate", where, default=1.0, positive=True)
    elif name == "central_t":
        spec["dim"] = _get_int(node, "dim", where, default=10, minimum=1)
    elif name == "scaled_t35":
        spec["dim"] = _get_int(node, "dim", where, default=10, minimum=1)
        spec["sigma_seed"] = _get_int(node, "sigma_seed", where, default=2024, minimum=0)
    elif name == "logistic_synthetic":
        spec["n"] = _get_int(node, "n", where, default=208, minimum=2)
        spec["dim"] = _get_int(node, "dim", where, default=60, minimum=1)
        spec["seed"] = _get_int(node, "seed", where, default=11, minimum=0)
        spec["prior_sd"] = _get_float(node, "prior_sd", where, default=10.0, positive=True)
    elif name == "logistic_csv":
        spec["path"] = _get_str(node, "path", where)
        spec["standardize"] = _get_bool(node, "standardize", where, default=False)
        spec["prior_sd"] = _get_float(node, "prior_sd", where, default=10.0, positive=True)
    else:  # poisson_hier
        spec["alpha"] = _get_float(node, "alpha", where, default=2.0, positive=True)
        spec["beta"] = _get_float(node, "beta", where, default=1.0, positive=True)
        spec["n_groups"] = _get_int(node, "n_groups", where, default=25, minimum=1)
        spec["n_per_group"] = _get_int(node, "n_per_group", where, default=5, minimum=1)
        spec["data_seed"] = _get_int(node, "data_seed", where, default=0, minimum=0)
    return spec


def validate_config(raw: dict) -> ExperimentConfig:
    """Validate a raw config mapping; raises ConfigError with the offending path."""
    raw = _need_mapping(raw, "config")
    _reject_unknown(raw, {"experiment", "target", "kernels", "run", "tuning", "sweep"},
                    "config")
    for section in ("experiment", "target", "kernels"):
        if section not in raw:
            raise ConfigError(f"config: missing required section '{section}'")

    exp = _need_mapping(raw["experiment"], "experiment")
    _reject_unknown(exp, {"name", "seed", "output"}, "experiment")
    name = _get_str(exp, "name", "experiment")
    seed = _get_int(exp, "seed", "experiment", minimum=0)
    output = _get_str(exp, "output", "experiment", default="results")

    target = _validate_target(raw["target"])

    if not isinstance(raw["kernels"], list) or not raw["kernels"]:
        raise ConfigError("kernels: expected a non-empty list")
    kernels = tuple(_validate_kernel(i, k) for i, k in enumerate(raw["kernels"]))
    labels = [k["name"] for k in kernels]
    if len(set(labels)) != len(labels):
        raise ConfigError("kernels: duplicate kernel names")

    if "run" not in raw:
        raise ConfigError("config: missing required section 'run'")
    run = _need_mapping(raw["run"], "run")
    _reject_unknown(run, {"iters", "burnin", "thin", "replications", "threads",
                          "store_states", "write_traces"}, "run")
    if "iters" not in run:
        raise ConfigError("run.iters: missing required key")
    run_spec = {
        "iters": _get_int(run, "iters", "run", minimum=2),
        "burnin": _get_int(run, "burnin", "run", default=10_000, minimum=0),
        "thin": _get_int(run, "thin", "run", default=10, minimum=1),
        "replications": _get_int(run, "replications", "run", default=10, minimum=1),
        "threads": _get_int(run, "threads", "run", default=1, minimum=1),
        "store_states": _get_bool(run, "store_states", "run", default=True),
        "write_traces": _get_bool(run, "write_traces", "run", default=True),
    }
    if run_spec["iters"] <= run_spec["burnin"]:
        raise ConfigError("run.burnin: must be smaller than run.iters")

    tuning = _need_mapping(raw.get("tuning", {}), "tuning")
    _reject_unknown(tuning, {"enabled", "iters", "scale", "target_accept",
                             "preconditioner"}, "tuning")
    tuning_spec = {
        "enabled": _get_bool(tuning, "enabled", "tuning", default=False),
        "iters": _get_int(tuning, "iters", "tuning", default=20_000, minimum=100),
        "scale": _get_float(tuning, "scale", "tuning", default=0.1, positive=True),
        "target_accept": _get_float(tuning, "target_accept", "tuning", default=0.25,
                                    positive=True),
        "preconditioner": _get_str(tuning, "preconditioner", "tuning", default="none",
                                   choices={"none", "diag", "full"}),
    }
    if tuning_spec["target_accept"] >= 1.0:
        raise ConfigError("tuning.target_accept: must be in (0, 1)")
    if tuning_spec["preconditioner"] != "none" and not tuning_spec["enabled"]:
        raise ConfigError("tuning.preconditioner: requires tuning.enabled")

    sweep_spec = None
    if "sweep" in raw and raw["sweep"] is not None:
        sweep = _need_mapping(raw["sweep"], "sweep")
        _reject_unknown(sweep, {"parameter", "values"}, "sweep")
        param = _get_str(sweep, "parameter", "sweep", choices={"x0_offset"})
        values = sweep.get("values")
        if (not isinstance(values, list) or not values
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in values)):
            raise ConfigError("sweep.values: expected a non-empty list of numbers")
        sweep_spec = {"parameter": param, "values": [float(v) for v in values]}

    # cross-section compatibility
    positive_target = target["name"] in _POSITIVE_TARGETS
    for spec in kernels:
        fam_tag, variant = _KERNELS[spec["name"]]
        if fam_tag in ("betagamma", "chisq") and not positive_target:
            raise ConfigError(
                f"kernel {spec['name']}: positive-orthant family cannot target "
                f"'{target['name']}' (support mismatch)")
        if spec["name"] == "mala" and target["name"] not in _GRADIENT_TARGETS:
            raise ConfigError(f"kernel mala: target '{target['name']}' has no gradient")
    if target["name"] == "poisson_hier":
        bad = [s["name"] for s in kernels if _KERNELS[s["name"]][0] not in
               ("betagamma", "chisq")]
        if bad:
            raise ConfigError(
                f"target poisson_hier: kernels {bad} are not positive-orthant "
                "families; the (shape, rate) chain lives on (0, inf)^2")
    if sweep_spec is not None:
        non_ar = [s["name"] for s in kernels if s["name"] not in _AR_KERNELS]
        if non_ar:
            raise ConfigError(
                f"sweep.parameter x0_offset: kernels {non_ar} take no center x0")
        if tuning_spec["enabled"]:
            raise ConfigError("sweep: cannot combine with tuning (tuning sets x0)")

    return ExperimentConfig(name=name, seed=seed, output=output, target=target,
                            kernels=kernels, run=run_spec, tuning=tuning_spec,
                            sweep=sweep_spec)


# ---------------------------------------------------------------------------
# building blocks


def build_target(spec: dict) -> TargetModel:
    name = spec["name"]
    if name == "gaussian":
        d = spec["dim"]
        mean = np.full(d, spec["mean_offset"])
        chol = CholFactor(spec["sd"] * np.eye(d))
        return gaussian_target(mean, chol)
    if name == "gamma_product":
        return gamma_product_target(spec["shape"], spec["rate"], spec["dim"])
    if name == "central_t":
        return central_t_target(spec["dim"])
    if name == "scaled_t35":
        return scaled_t_target(spec["dim"], seed=spec["sigma_seed"])
    if name == "logistic_synthetic":
        design, labels = simulate_logistic_data(spec["n"], spec["dim"], spec["seed"])
        return logistic_target(design, labels, spec["prior_sd"])
    if name == "logistic_csv":
        design, labels = load_design_csv(spec["path"], standardize=spec["standardize"])
        return logistic_target(design, labels, spec["prior_sd"])
    raise ConfigError(f"target '{name}' is not built through build_target")


def default_init(target: TargetModel) -> np.ndarray:
    if target.support == "positive":
        return np.ones(target.dim)
    if target.name == "logistic":
        return np.zeros(target.dim)
    return np.ones(target.dim)


def _nudge_if_colliding(x0: np.ndarray, x_init: np.ndarray) -> np.ndarray:
    # a state sitting exactly on the AR center has a degenerate statistic;
    # shift the center estimate by machine noise, never the state
    if x0.shape == x_init.shape and np.array_equal(x0, x_init):
        x0 = x0.copy()
        x0[0] += 1e-9 * (1.0 + abs(x0[0]))
        log.info("kernel center coincided with the initial state; nudged x0")
    return x0


def build_kernel(spec: dict, target: TargetModel, x_init: np.ndarray,
                 x0: np.ndarray | None = None, m_chol: CholFactor | None = None,
                 x0_offset: float | None = None):
    """Instantiate the kernel driver a config entry describes.

    ``x0``/``m_chol`` come from a tuning stage when present; ``x0_offset``
    overrides the config entry's offset (the sweep path).
    """
    name = spec["name"]
    fam_tag, variant = _KERNELS[name]
    if fam_tag is None:
        if name == "rwm":
            return RandomWalkKernel(spec["scale"], target)
        return MalaKernel(spec["scale"], target)
    if fam_tag == "ar":
        d = target.dim
        if x0 is None:
            offset = spec["x0_offset"] if x0_offset is None else x0_offset
            x0 = np.zeros(d)
            x0[0] = offset
        if m_chol is None:
            m_chol = CholFactor.identity(d)
        x0 = _nudge_if_colliding(np.asarray(x0, dtype=float), x_init)
        family = ARFamily(dim=d, rho=spec["rho"], x0=x0, chol=m_chol)
    elif fam_tag == "betagamma":
        family = BetaGammaFamily(dim=target.dim, k=spec["k"], rho=spec["rho"],
                                 order=spec.get("order", "product"))
    else:
        family = ChiSquaredFamily(dim=target.dim, rho=spec["rho"], L=spec["L"])
    if variant == "plain":
        return PlainMetropolisKernel(family, target)
    if variant == "haar":
        return MetropolisHaarKernel(family, target)
    return GuidedMetropolisHaarKernel(family, target, max_tries=spec["max_tries"])


def tune_center_and_preconditioner(target: TargetModel, tuning: dict, seed: int,
                                   stream: int):
    """Adaptive random-walk burn-in: returns (x0, m_chol, final_state, scale).

    The proposal scale follows a Robbins-Monro recursion toward the acceptance
    target; the center estimate is the sample mean of the second half and the
    preconditioner the diagonally-loaded sample covariance of the same stretch.
    Nothing from this stage enters measured statistics.
    """
    rng = RngStream(seed, stream).generator()
    kernel = RandomWalkKernel(tuning["scale"], target)
    st = kernel.init_state(default_init(target))
    n = tuning["iters"]
    want = tuning["target_accept"]
    d = target.dim
    samples = np.empty((n, d))
    log_scale = math.log(tuning["scale"])
    for t in range(n):
        kernel.scale = math.exp(log_scale)
        st, acc, _, _ = kernel.step(st, rng)
        samples[t] = st[0]
        log_scale += (2.0 / math.sqrt(t + 10.0)) * ((1.0 if acc else 0.0) - want)
    tail = samples[n // 2:]  # the walk needs time to find the mass
    x0 = tail.mean(axis=0)
    kind = tuning["preconditioner"]
    if kind == "none":
        m_chol = CholFactor.identity(d)
    elif kind == "diag":
        m_chol = CholFactor(np.diag(np.sqrt(tail.var(axis=0) + 1e-6)))
    else:
        cov = np.atleast_2d(np.cov(tail.T)) + 1e-6 * np.eye(d)
        m_chol = CholFactor.from_covariance(cov)
    return x0, m_chol, st[0].copy(), math.exp(log_scale)


# ---------------------------------------------------------------------------
# hierarchical Poisson chain (Gibbs on rates, kernel on the hyperparameters)


def run_hier_chain(data: PoissonHierData, kernel_spec: dict, iters: int,
                   burnin: int = 0, thin: int = 1, seed: int = 0, stream: int = 0,
                   store_states: bool = True, init=(1.0, 1.0),
                   prior_shape: float = 0.05, prior_rate: float = 0.05) -> ChainTrace:
    """Alternate an exact Gibbs draw of the group rates with one kernel step on
    the (shape, rate) hyperparameters.

    The hyperparameter target is the conditional log posterior given the
    current rates, so its cached value is refreshed after every Gibbs sweep.
    """
    if burnin < 0 or iters <= burnin:
        raise ValueError("need iters > burnin >= 0")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    m_groups = data.n_groups
    sums = [0.0, 0.0]  # (sum log theta, sum theta), updated in place

    def logp(v):
        return hier_logpost_from_sums(v[0], v[1], m_groups, sums[0], sums[1],
                                      prior_shape, prior_rate)

    target = TargetModel(dim=2, log_density=logp, support="positive",
                         name="poisson_hier")
    rng = RngStream(seed, stream).generator()
    alpha0, beta0 = float(init[0]), float(init[1])
    theta = gibbs_theta(alpha0, beta0, data, rng)
    sums[0] = float(np.sum(np.log(theta)))
    sums[1] = float(np.sum(theta))
    kernel = build_kernel(kernel_spec, target, np.array([alpha0, beta0]))
    st = kernel.init_state(np.array([alpha0, beta0]))
    guided = kernel.guided

    log_target = np.empty(iters)
    accepted = np.zeros(iters, dtype=bool)
    direction = np.zeros(iters, dtype=np.int8)
    inner_tries = np.ones(iters, dtype=np.int32)
    n_keep = -(-(iters - burnin) // thin)
    states = np.empty((n_keep, 2)) if store_states else None
    state_iters = np.empty(n_keep, dtype=np.int64) if store_states else None

    step = kernel.step
    kept = 0
    t_start = time.perf_counter()
    t_mid = t_start
    for t in range(iters):
        if t == burnin:
            t_mid = time.perf_counter()
        x = st[0]
        theta = gibbs_theta(x[0], x[1], data, rng)
        sums[0] = float(np.sum(np.log(theta)))
        sums[1] = float(np.sum(theta))
        st = kernel.refresh(st)
        st, acc, lt, k = step(st, rng)
        log_target[t] = lt
        accepted[t] = acc
        inner_tries[t] = k
        if guided:
            direction[t] = st[1]
        if store_states and t >= burnin and (t - burnin) % thin == 0:
            states[kept] = st[0]
            state_iters[kept] = t
            kept += 1
    t_end = time.perf_counter()
    if burnin == 0:
        t_mid = t_start

    return ChainTrace(
        log_target=log_target, accepted=accepted, direction=direction,
        inner_tries=inner_tries, states=states, state_iters=state_iters,
        iters=iters, burnin=burnin, thin=thin, seed=seed, stream=stream,
        kernel={**kernel.describe(), "gibbs": "group-rates"},
        target_name="poisson_hier",
        wall_time=t_end - t_start, sampling_time=t_end - t_mid, guided=guided,
    )


# ---------------------------------------------------------------------------
# experiment runner


def _task_stream(sweep_idx: int, kernel_idx: int, rep: int) -> int:
    # disjoint, deterministic stream ids; factor 2 leaves room for a tuning stream
    return 2 * (rep + 10_000 * (kernel_idx + 100 * sweep_idx))


def _run_task(task: dict) -> dict:
    """One (kernel, replication, sweep-value) chain; safe to run in a worker."""
    cfg: ExperimentConfig = task["config"]
    spec = dict(cfg.kernels[task["kernel_idx"]])
    run = cfg.run
    stream = _task_stream(task["sweep_idx"], task["kernel_idx"], task["rep"])
    label = spec["name"]

    if cfg.target["name"] == "poisson_hier":
        t = cfg.target
        data = simulate_hier_data(t["alpha"], t["beta"], t["n_groups"],
                                  t["n_per_group"], t["data_seed"])
        trace = run_hier_chain(data, spec, run["iters"], run["burnin"], run["thin"],
                               seed=cfg.seed, stream=stream,
                               store_states=run["store_states"])
    else:
        target = build_target(cfg.target)
        x0 = m_chol = None
        x_init = default_init(target)
        if cfg.tuning["enabled"]:
            x0, m_chol, x_init, adapted_scale = tune_center_and_preconditioner(
                target, cfg.tuning, cfg.seed, stream + 1)
            if spec["name"] == "rwm":
                spec["scale"] = adapted_scale
        kernel = build_kernel(spec, target, x_init, x0=x0, m_chol=m_chol,
                              x0_offset=task["sweep_value"])
        trace = run_chain(kernel, x_init, run["iters"], run["burnin"], run["thin"],
                          seed=cfg.seed, stream=stream,
                          store_states=run["store_states"])

    if task["trace_path"] is not None:
        trace.write_csv(task["trace_path"] + ".csv")
        trace.write_meta(task["trace_path"] + ".json")

    try:
        report = ess(trace.measured_log_target, wall_time=trace.sampling_time)
        ess_value, ess_rate = report.ess, report.ess_per_second
    except ValueError:
        # a chain that never accepted has a constant log-target; keep the row
        # so the aggregate shows the failure instead of the run crashing
        log.warning("chain %s rep %d produced a constant log-target; ess is nan",
                    label, task["rep"])
        ess_value = ess_rate = float("nan")
    return {
        "kernel": label,
        "replication": task["rep"],
        "ess": ess_value,
        "ess_per_sec": ess_rate,
        "accept_rate": trace.acceptance,
        "mean_inner_tries": trace.mean_inner_tries,
        "direction_balance": trace.direction_balance if trace.guided else None,
        "_sweep_value": task["sweep_value"],
        "_kernel_idx": task["kernel_idx"],
        "_n_measured": trace.iters - trace.burnin,
    }


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_aggregate(rows: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in AGGREGATE_COLUMNS])


def emit_table(rows: list, metric: str = "ess_per_sec",
               group_label: str = "x0_offset") -> str:
    """Render mean-per-(kernel, sweep value) of a metric as a fixed-width table."""
    values = sorted({r["_sweep_value"] for r in rows},
                    key=lambda v: (v is None, v))
    kernels = []
    for r in rows:
        if r["kernel"] not in kernels:
            kernels.append(r["kernel"])
    means = {}
    for r in rows:
        key = (r["kernel"], r["_sweep_value"])
        means.setdefault(key, []).append(r[metric])
    headers = ["kernel"] + [("all" if v is None else f"{group_label}={v:g}")
                            for v in values]
    body = []
    for k in kernels:
        line = [k]
        for v in values:
            got = means.get((k, v))
            line.append("-" if not got else f"{float(np.mean(got)):.2f}")
        body.append(line)
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(headers)]
    fmt_row = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths))
    lines = [fmt_row(headers), fmt_row(["-" * w for w in widths])]
    lines += [fmt_row(b) for b in body]
    return f"mean {metric} by kernel\n" + "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, out_dir=None, seed: int | None = None,
                   threads: int | None = None, kernel_filter=None,
                   quiet: bool = False) -> dict:
    """Run every (sweep value x kernel x replication) chain, write artifacts.

    Returns {"rows": [...], "aggregates": {label: path}, "table": str | None}.
    """
    if seed is not None:
        config = ExperimentConfig(config.name, seed, config.output, config.target,
                                  config.kernels, config.run, config.tuning,
                                  config.sweep)
    if kernel_filter:
        wanted = set(kernel_filter)
        known = {k["name"] for k in config.kernels}
        missing = wanted - known
        if missing:
            raise ConfigError(f"--kernel: {sorted(missing)} not in config kernels")
    out = config.output if out_dir is None else out_dir
    os.makedirs(out, exist_ok=True)
    trace_dir = os.path.join(out, "traces")
    if config.run["write_traces"]:
        os.makedirs(trace_dir, exist_ok=True)
    n_threads = config.run["threads"] if threads is None else threads

    sweep_values = [None] if config.sweep is None else config.sweep["values"]
    tasks = []
    for s_idx, s_val in enumerate(sweep_values):
        for k_idx, spec in enumerate(config.kernels):
            if kernel_filter and spec["name"] not in kernel_filter:
                continue
            for rep in range(config.run["replications"]):
                stem = spec["name"] + (f"_x0={s_val:g}" if s_val is not None else "")
                trace_path = (os.path.join(trace_dir, f"{stem}_rep{rep}")
                              if config.run["write_traces"] else None)
                tasks.append({
                    "config": config, "sweep_idx": s_idx, "sweep_value": s_val,
                    "kernel_idx": k_idx, "rep": rep, "trace_path": trace_path,
                })

    if not quiet:
        log.info("running %d chains on %d worker(s)", len(tasks), n_threads)
    t0 = time.perf_counter()
    if n_threads == 1:
        rows = [_run_task(t) for t in tasks]
    else:
        with Pool(processes=n_threads) as pool:
            rows = pool.map(_run_task, tasks, chunksize=1)
    if not quiet:
        log.info("all chains done in %.1fs", time.perf_counter() - t0)

    rows.sort(key=lambda r: ((0 if r["_sweep_value"] is None else 1),
                             r["_sweep_value"] if r["_sweep_value"] is not None else 0.0,
                             r["_kernel_idx"], r["replication"]))
    aggregates = {}
    for s_val in sweep_values:
        sub = [r for r in rows if r["_sweep_value"] == s_val]
        if not sub:
            continue
        label = "aggregate" if s_val is None else f"aggregate_x0={s_val:g}"
        path = os.path.join(out, label + ".csv")
        write_aggregate(sub, path)
        aggregates[label] = path

    table = None
    if config.sweep is not None:
        table = emit_table(rows)
        with open(os.path.join(out, "table.txt"), "w") as fh:
            fh.write(table)
        if not quiet:
            print(table, end="")

    return {"rows": rows, "aggregates": aggregates, "table": table}
