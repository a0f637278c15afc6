"""Experiment orchestration: config files, replicated runs, paired baselines,
and deterministic CSV artifacts.

Every replicate ``r`` derives its randomness from the master seed alone
(dataset from ``("dataset", r)``, per-device encoding noise from
``("encode", r, i)``, training masks and the initial iterate from
``("train", r)``), so two runs of the same config produce byte-identical
files, replicates can execute in parallel, and two methods run on the same
seed consume bit-identical datasets, coding noise, and straggler draws.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .coding import GlobalCodedData, NoiseParams, aggregate_coded, encode_local
from .dataset import FederatedDataset, generate, loss, optimum
from .errors import NumericError, ParameterError
from .numerics import RngStream
from .privacy import sigma_for_epsilon
from .training import (
    AdaptiveEstimated,
    AdaptiveOracle,
    AggregationPolicy,
    FixedWeight,
    InverseDecay,
    TrainingTrace,
    schedule_for_strong_convexity,
    train,
)

__all__ = [
    "ComparisonResult",
    "ExperimentConfig",
    "OracleAuto",
    "ReplicateRecord",
    "RunResult",
    "compare_baselines",
    "load_config",
    "run_experiment",
    "save_config",
]

TRACE_HEADER = "replicate,t,alpha_t,n_present,loss,dist_sq,grad_norm_sq"
SUMMARY_HEADER = "t,mean_loss,stderr_loss,mean_dist_sq,stderr_dist_sq"
COMPARISON_HEADER = "noise_sigma_sq,method,seed,final_loss"
METHOD_ADAPTIVE = "acfl"
METHOD_BASELINE = "na"


@dataclass(frozen=True)
class OracleAuto:
    """Oracle policy with constants left to a probe run.

    The probe trains once (replicate 0, norm-estimating weights) and sets
    ``beta_sq``/``c_sq`` to the largest observed device-gradient and iterate
    squared norms times ``margin``.  A heuristic: the realized norms of the
    oracle run itself are reported in its trace and should be re-checked.
    """

    margin: float = 2.0

    def __post_init__(self):
        if not self.margin >= 1.0:
            raise ParameterError(f"margin must be at least 1, got {self.margin}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: dataset shape, failure/noise model, policy, schedule."""

    n_devices: int
    m: int
    d: int
    o: int
    straggler_p: float
    noise: NoiseParams | None
    epsilon: float | None
    policy: AggregationPolicy | OracleAuto
    schedule: InverseDecay | None  # None: per-replicate 1/(lam t)
    steps: int
    master_seed: int
    replicates: int
    out_dir: str
    noise_levels: tuple[float, ...] = (0.1, 10.0)
    baseline: AggregationPolicy | OracleAuto = FixedWeight(0.5)

    def __post_init__(self):
        if self.n_devices < 1:
            raise ParameterError(f"dataset.n_devices: must be positive, got {self.n_devices}")
        if self.d < 1 or self.o < 1:
            raise ParameterError(f"dataset.d/dataset.o: must be positive, got {self.d}, {self.o}")
        if self.m <= self.d:
            raise ParameterError(f"dataset.m: need m > d, got m={self.m}, d={self.d}")
        if not 0.0 <= self.straggler_p < 1.0:
            raise ParameterError(f"straggler_p: must lie in [0, 1), got {self.straggler_p}")
        if (self.noise is None) == (self.epsilon is None):
            raise ParameterError("noise: give exactly one of (sigma1_sq, sigma2_sq) or epsilon")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ParameterError(f"noise.epsilon: must be positive, got {self.epsilon}")
        if self.steps < 0:
            raise ParameterError(f"steps: must be nonnegative, got {self.steps}")
        if self.replicates < 1:
            raise ParameterError(f"replicates: must be positive, got {self.replicates}")
        if not self.out_dir:
            raise ParameterError("out_dir: must be a nonempty path")
        object.__setattr__(self, "noise_levels", tuple(float(x) for x in self.noise_levels))
        for x in self.noise_levels:
            if x < 0:
                raise ParameterError(f"noise_levels: must be nonnegative, got {x}")

    def resolved_noise(self) -> NoiseParams:
        if self.noise is not None:
            return self.noise
        return sigma_for_epsilon(self.epsilon, self.d, self.o)


def _policy_from_dict(spec, path: str) -> AggregationPolicy | OracleAuto:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ParameterError(f"{path}: expected an object with a 'kind' field")
    kind = spec["kind"]
    if kind == "fixed":
        if "alpha" not in spec:
            raise ParameterError(f"{path}.alpha: missing")
        return FixedWeight(float(spec["alpha"]))
    if kind == "adaptive-estimated":
        return AdaptiveEstimated(float(spec.get("fallback_alpha", 1.0)))
    if kind == "adaptive-oracle":
        if "beta_sq" in spec and "c_sq" in spec:
            return AdaptiveOracle(float(spec["beta_sq"]), float(spec["c_sq"]))
        if "beta_sq" in spec or "c_sq" in spec:
            raise ParameterError(f"{path}: give both beta_sq and c_sq, or neither")
        return OracleAuto(float(spec.get("margin", 2.0)))
    raise ParameterError(f"{path}.kind: unknown policy kind {kind!r}")


def _policy_to_dict(policy) -> dict:
    if isinstance(policy, FixedWeight):
        return {"kind": "fixed", "alpha": policy.alpha}
    if isinstance(policy, AdaptiveEstimated):
        return {"kind": "adaptive-estimated", "fallback_alpha": policy.fallback_alpha}
    if isinstance(policy, AdaptiveOracle):
        return {"kind": "adaptive-oracle", "beta_sq": policy.beta_sq, "c_sq": policy.c_sq}
    if isinstance(policy, OracleAuto):
        return {"kind": "adaptive-oracle", "margin": policy.margin}
    raise ParameterError(f"policy: unsupported policy object {policy!r}")


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a config from its nested-dict form.

    Error messages name the offending field path (for example ``dataset.m``).
    """
    if not isinstance(raw, dict):
        raise ParameterError("config: expected a JSON object at top level")
    try:
        dataset = raw["dataset"]
    except KeyError:
        raise ParameterError("dataset: missing") from None
    for key in ("n_devices", "m", "d", "o"):
        if key not in dataset:
            raise ParameterError(f"dataset.{key}: missing")
    noise_spec = raw.get("noise")
    if not isinstance(noise_spec, dict):
        raise ParameterError("noise: missing or not an object")
    if "epsilon" in noise_spec:
        noise, epsilon = None, float(noise_spec["epsilon"])
    elif "sigma1_sq" in noise_spec and "sigma2_sq" in noise_spec:
        noise = NoiseParams(float(noise_spec["sigma1_sq"]), float(noise_spec["sigma2_sq"]))
        epsilon = None
    else:
        raise ParameterError("noise: give sigma1_sq and sigma2_sq, or epsilon")
    schedule_spec = raw.get("schedule")
    if not isinstance(schedule_spec, dict) or "kind" not in schedule_spec:
        raise ParameterError("schedule: missing or lacks a 'kind' field")
    if schedule_spec["kind"] == "inverse":
        if "c" not in schedule_spec:
            raise ParameterError("schedule.c: missing")
        schedule = InverseDecay(float(schedule_spec["c"]))
    elif schedule_spec["kind"] == "strong-convexity":
        schedule = None
    else:
        raise ParameterError(f"schedule.kind: unknown kind {schedule_spec['kind']!r}")
    for key in ("straggler_p", "policy", "steps", "master_seed", "replicates", "out_dir"):
        if key not in raw:
            raise ParameterError(f"{key}: missing")
    kwargs = {}
    if "noise_levels" in raw:
        kwargs["noise_levels"] = tuple(float(x) for x in raw["noise_levels"])
    if "baseline" in raw:
        kwargs["baseline"] = _policy_from_dict(raw["baseline"], "baseline")
    return ExperimentConfig(
        n_devices=int(dataset["n_devices"]),
        m=int(dataset["m"]),
        d=int(dataset["d"]),
        o=int(dataset["o"]),
        straggler_p=float(raw["straggler_p"]),
        noise=noise,
        epsilon=epsilon,
        policy=_policy_from_dict(raw["policy"], "policy"),
        schedule=schedule,
        steps=int(raw["steps"]),
        master_seed=int(raw["master_seed"]),
        replicates=int(raw["replicates"]),
        out_dir=str(raw["out_dir"]),
        **kwargs,
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Inverse of :func:`config_from_dict`; the round-trip is lossless."""
    if cfg.epsilon is not None:
        noise_spec = {"epsilon": cfg.epsilon}
    else:
        noise_spec = {"sigma1_sq": cfg.noise.sigma1_sq, "sigma2_sq": cfg.noise.sigma2_sq}
    if cfg.schedule is None:
        schedule_spec = {"kind": "strong-convexity"}
    else:
        schedule_spec = {"kind": "inverse", "c": cfg.schedule.c}
    return {
        "dataset": {"n_devices": cfg.n_devices, "m": cfg.m, "d": cfg.d, "o": cfg.o},
        "straggler_p": cfg.straggler_p,
        "noise": noise_spec,
        "policy": _policy_to_dict(cfg.policy),
        "schedule": schedule_spec,
        "steps": cfg.steps,
        "master_seed": cfg.master_seed,
        "replicates": cfg.replicates,
        "out_dir": cfg.out_dir,
        "noise_levels": list(cfg.noise_levels),
        "baseline": _policy_to_dict(cfg.baseline),
    }


def load_config(path) -> ExperimentConfig:
    """Read a JSON config file (schema documented in the README)."""
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ParameterError(f"config: invalid JSON in {path}: {e}") from None
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", newline="") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


@dataclass(frozen=True, eq=False)
class ReplicateRecord:
    """One replicate's trace plus content digests for pairing checks."""

    replicate: int
    trace: TrainingTrace
    final_loss: float
    dataset_digest: str
    coded_digest: str

    @property
    def mask_digest(self) -> str:
        return self.trace.mask_digest


@dataclass(frozen=True, eq=False)
class RunResult:
    """All replicates of one experiment plus where the artifacts went."""

    config: ExperimentConfig
    policy: AggregationPolicy
    records: tuple[ReplicateRecord, ...]
    trace_path: Path
    summary_path: Path


@dataclass(frozen=True, eq=False)
class ComparisonResult:
    """Paired-seed comparison of the adaptive method against a baseline."""

    rows: tuple[tuple[float, str, int, float], ...]
    win_rates: dict[float, float]
    records: dict[tuple[float, str], tuple[ReplicateRecord, ...]]
    path: Path


def _dataset_digest(ds: FederatedDataset) -> str:
    h = hashlib.sha256()
    for dev in ds.devices:
        h.update(dev.x.tobytes())
        h.update(dev.y.tobytes())
    if ds.w_true is not None:
        h.update(ds.w_true.tobytes())
    return h.hexdigest()


def _coded_digest(gc: GlobalCodedData) -> str:
    h = hashlib.sha256()
    h.update(gc.h_x_sum.tobytes())
    h.update(gc.h_y_sum.tobytes())
    return h.hexdigest()


def _run_replicate(cfg: ExperimentConfig, policy: AggregationPolicy, r: int) -> ReplicateRecord:
    root = RngStream(cfg.master_seed)
    ds = generate(cfg.n_devices, cfg.m, cfg.d, cfg.o, root.child("dataset", r))
    facts = optimum(ds)
    noise = cfg.resolved_noise()
    encoded = [
        encode_local(dev, noise, root.child("encode", r, i)) for i, dev in enumerate(ds.devices)
    ]
    gc = aggregate_coded(encoded)
    schedule = cfg.schedule or schedule_for_strong_convexity(facts.lam)
    trace = train(
        ds,
        gc,
        policy,
        cfg.straggler_p,
        cfg.steps,
        schedule,
        root.child("train", r),
        facts,
        noise=noise,
    )
    return ReplicateRecord(
        replicate=r,
        trace=trace,
        final_loss=loss(trace.final_w, ds),
        dataset_digest=_dataset_digest(ds),
        coded_digest=_coded_digest(gc),
    )


def _run_replicates(
    cfg: ExperimentConfig, policy: AggregationPolicy, workers: int
) -> tuple[ReplicateRecord, ...]:
    indices = range(cfg.replicates)
    if workers <= 1:
        records = [_run_replicate(cfg, policy, r) for r in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda r: _run_replicate(cfg, policy, r), indices))
    return tuple(sorted(records, key=lambda rec: rec.replicate))


def resolve_policy(cfg: ExperimentConfig) -> AggregationPolicy:
    """Concrete policy for a config, probing for oracle constants if needed."""
    policy = cfg.policy
    if not isinstance(policy, OracleAuto):
        return policy
    if cfg.steps < 1:
        raise ParameterError("policy: auto oracle constants need steps >= 1 to probe")
    probe = _run_replicate(cfg, AdaptiveEstimated(1.0), 0)
    beta_sq = float(probe.trace.max_device_grad_sq.max()) * policy.margin
    c_sq = float(probe.trace.w_norm_sq.max()) * policy.margin
    if not (beta_sq > 0 and c_sq > 0):
        raise NumericError("probe run observed zero norms; supply oracle constants explicitly")
    return AdaptiveOracle(beta_sq, c_sq)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_trace(path: Path, records) -> None:
    with open(path, "w", newline="") as f:
        f.write(TRACE_HEADER + "\n")
        for rec in records:
            tr = rec.trace
            for i in range(tr.steps):
                f.write(
                    f"{rec.replicate},{tr.t[i]},{_fmt(tr.alpha[i])},{tr.n_present[i]},"
                    f"{_fmt(tr.loss[i])},{_fmt(tr.dist_sq[i])},{_fmt(tr.grad_norm_sq[i])}\n"
                )


def summarize(records) -> np.ndarray:
    """Per-iteration aggregates across replicates.

    Returns an array of rows ``(t, mean_loss, stderr_loss, mean_dist_sq,
    stderr_dist_sq)``; the standard error is the ddof-1 standard deviation
    over replicates divided by ``sqrt(R)`` (zero when ``R == 1``).
    """
    losses = np.stack([rec.trace.loss for rec in records])
    dists = np.stack([rec.trace.dist_sq for rec in records])
    n_rep, steps = losses.shape
    out = np.zeros((steps, 5))
    out[:, 0] = np.arange(steps)
    out[:, 1] = losses.mean(axis=0)
    out[:, 3] = dists.mean(axis=0)
    if n_rep > 1:
        out[:, 2] = losses.std(axis=0, ddof=1) / np.sqrt(n_rep)
        out[:, 4] = dists.std(axis=0, ddof=1) / np.sqrt(n_rep)
    return out


def _write_summary(path: Path, records) -> None:
    rows = summarize(records)
    with open(path, "w", newline="") as f:
        f.write(SUMMARY_HEADER + "\n")
        for row in rows:
            f.write(
                f"{int(row[0])},{_fmt(row[1])},{_fmt(row[2])},{_fmt(row[3])},{_fmt(row[4])}\n"
            )


def run_experiment(cfg: ExperimentConfig, *, workers: int = 1) -> RunResult:
    """Run all replicates and write ``trace.csv`` and ``summary.csv``.

    Identical configs produce byte-identical files regardless of ``workers``.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy = resolve_policy(cfg)
    records = _run_replicates(cfg, policy, workers)
    trace_path = out_dir / "trace.csv"
    summary_path = out_dir / "summary.csv"
    _write_trace(trace_path, records)
    _write_summary(summary_path, records)
    return RunResult(cfg, policy, records, trace_path, summary_path)


def compare_baselines(
    cfg: ExperimentConfig,
    noise_levels=None,
    *,
    workers: int = 1,
) -> ComparisonResult:
    """Adaptive method vs. baseline on paired seeds, per noise level.

    For each common variance in ``noise_levels`` both methods run on the
    same replicate streams, so they see bit-identical datasets, coding
    noise, and straggler masks; only the aggregation weights differ.
    Writes ``comparison.csv`` and reports, per level, the fraction of seeds
    where the adaptive final loss does not exceed the baseline's.
    """
    levels = tuple(float(x) for x in (noise_levels if noise_levels is not None else cfg.noise_levels))
    if len(levels) == 0:
        raise ParameterError("noise_levels: need at least one level")
    adaptive = cfg.policy if isinstance(cfg.policy, AdaptiveEstimated) else AdaptiveEstimated(1.0)
    rows = []
    records: dict[tuple[float, str], tuple[ReplicateRecord, ...]] = {}
    win_rates: dict[float, float] = {}
    for level in levels:
        cfg_level = replace(cfg, noise=NoiseParams(level, level), epsilon=None)
        baseline = cfg_level.baseline
        if isinstance(baseline, OracleAuto):
            baseline = resolve_policy(replace(cfg_level, policy=baseline))
        recs_a = _run_replicates(cfg_level, adaptive, workers)
        recs_b = _run_replicates(cfg_level, baseline, workers)
        records[(level, METHOD_ADAPTIVE)] = recs_a
        records[(level, METHOD_BASELINE)] = recs_b
        for rec in recs_a:
            rows.append((level, METHOD_ADAPTIVE, rec.replicate, rec.final_loss))
        for rec in recs_b:
            rows.append((level, METHOD_BASELINE, rec.replicate, rec.final_loss))
        wins = sum(
            1 for a, b in zip(recs_a, recs_b) if a.final_loss <= b.final_loss
        )
        win_rates[level] = wins / len(recs_a)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "comparison.csv"
    with open(path, "w", newline="") as f:
        f.write(COMPARISON_HEADER + "\n")
        for level, method, seed, final_loss in rows:
            f.write(f"{_fmt(level)},{method},{seed},{_fmt(final_loss)}\n")
    return ComparisonResult(tuple(rows), win_rates, records, path)
