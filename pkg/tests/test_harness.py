import hashlib

import numpy as np
import pytest

from acfl.coding import NoiseParams
from acfl.errors import ParameterError
from acfl.harness import (
    ExperimentConfig,
    OracleAuto,
    compare_baselines,
    config_from_dict,
    config_to_dict,
    load_config,
    resolve_policy,
    run_experiment,
    save_config,
)
from acfl.training import AdaptiveEstimated, AdaptiveOracle, FixedWeight, InverseDecay


def small_config(out_dir, **overrides) -> ExperimentConfig:
    base = dict(
        n_devices=3,
        m=8,
        d=3,
        o=2,
        straggler_p=0.3,
        noise=NoiseParams(0.5, 0.5),
        epsilon=None,
        policy=AdaptiveEstimated(),
        schedule=InverseDecay(1e-3),
        steps=5,
        master_seed=11,
        replicates=2,
        out_dir=str(out_dir),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def raw_config_dict(out_dir) -> dict:
    return {
        "dataset": {"n_devices": 3, "m": 8, "d": 3, "o": 2},
        "straggler_p": 0.3,
        "noise": {"sigma1_sq": 0.5, "sigma2_sq": 0.5},
        "policy": {"kind": "adaptive-estimated", "fallback_alpha": 1.0},
        "schedule": {"kind": "inverse", "c": 0.001},
        "steps": 5,
        "master_seed": 11,
        "replicates": 2,
        "out_dir": str(out_dir),
    }


# ------------------------------------------------------------------- config


def test_config_dict_roundtrip(tmp_path):
    cfg = small_config(tmp_path, epsilon=2.5, noise=None, schedule=None, baseline=FixedWeight(0.25))
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_config_file_roundtrip(tmp_path):
    cfg = small_config(tmp_path / "out", noise_levels=(0.25, 4.0))
    path = tmp_path / "config.json"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_config_parses_policy_kinds(tmp_path):
    raw = raw_config_dict(tmp_path)
    raw["policy"] = {"kind": "fixed", "alpha": 0.5}
    assert config_from_dict(raw).policy == FixedWeight(0.5)
    raw["policy"] = {"kind": "adaptive-oracle", "beta_sq": 2.0, "c_sq": 3.0}
    assert config_from_dict(raw).policy == AdaptiveOracle(2.0, 3.0)
    raw["policy"] = {"kind": "adaptive-oracle"}
    assert config_from_dict(raw).policy == OracleAuto(2.0)


@pytest.mark.parametrize(
    "mutate,needle",
    [
        (lambda raw: raw["dataset"].pop("m"), "dataset.m"),
        (lambda raw: raw.pop("straggler_p"), "straggler_p"),
        (lambda raw: raw.__setitem__("straggler_p", 1.0), "straggler_p"),
        (lambda raw: raw["dataset"].__setitem__("m", 3), "dataset.m"),
        (lambda raw: raw.__setitem__("noise", {}), "noise"),
        (lambda raw: raw["policy"].__setitem__("kind", "nope"), "policy.kind"),
        (lambda raw: raw.__setitem__("schedule", {"kind": "inverse"}), "schedule.c"),
        (lambda raw: raw.__setitem__("replicates", 0), "replicates"),
    ],
)
def test_config_errors_name_field_paths(tmp_path, mutate, needle):
    raw = raw_config_dict(tmp_path)
    mutate(raw)
    with pytest.raises(ParameterError, match=needle.replace(".", r"\.")):
        config_from_dict(raw)


def test_config_rejects_noise_and_epsilon_together(tmp_path):
    with pytest.raises(ParameterError, match="noise"):
        small_config(tmp_path, epsilon=1.0)


def test_config_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParameterError, match="invalid JSON"):
        load_config(path)


def test_config_resolves_noise_from_epsilon(tmp_path):
    cfg = small_config(tmp_path, noise=None, epsilon=2.0)
    noise = cfg.resolved_noise()
    assert noise.sigma1_sq == noise.sigma2_sq > 0


# ------------------------------------------------------------------- runner


def test_run_experiment_artifacts(tmp_path):
    cfg = small_config(tmp_path / "run")
    result = run_experiment(cfg)
    trace_lines = result.trace_path.read_text().splitlines()
    assert trace_lines[0] == "replicate,t,alpha_t,n_present,loss,dist_sq,grad_norm_sq"
    assert len(trace_lines) == 1 + cfg.replicates * cfg.steps
    summary_lines = result.summary_path.read_text().splitlines()
    assert summary_lines[0] == "t,mean_loss,stderr_loss,mean_dist_sq,stderr_dist_sq"
    assert len(summary_lines) == 1 + cfg.steps
    assert len(result.records) == cfg.replicates


def test_run_experiment_deterministic_and_parallel_safe(tmp_path):
    digests = []
    for name, workers in (("a", 1), ("b", 1), ("c", 3)):
        cfg = small_config(tmp_path / name, steps=12, replicates=4)
        result = run_experiment(cfg, workers=workers)
        digests.append(
            (
                hashlib.sha256(result.trace_path.read_bytes()).hexdigest(),
                hashlib.sha256(result.summary_path.read_bytes()).hexdigest(),
            )
        )
    assert digests[0] == digests[1] == digests[2]


def test_run_experiment_empty_edge(tmp_path):
    cfg = small_config(tmp_path / "empty", steps=0, replicates=1)
    result = run_experiment(cfg)
    assert result.trace_path.read_text().splitlines() == [
        "replicate,t,alpha_t,n_present,loss,dist_sq,grad_norm_sq"
    ]
    assert result.summary_path.read_text().splitlines() == [
        "t,mean_loss,stderr_loss,mean_dist_sq,stderr_dist_sq"
    ]


def test_summary_recomputable_from_trace(tmp_path):
    cfg = small_config(tmp_path / "sum", steps=7, replicates=3)
    result = run_experiment(cfg)
    rows = [line.split(",") for line in result.trace_path.read_text().splitlines()[1:]]
    by_t: dict[int, list[tuple[float, float]]] = {}
    for row in rows:
        by_t.setdefault(int(row[1]), []).append((float(row[4]), float(row[5])))
    summary = [line.split(",") for line in result.summary_path.read_text().splitlines()[1:]]
    for row in summary:
        t = int(row[0])
        losses = np.array([v[0] for v in by_t[t]])
        dists = np.array([v[1] for v in by_t[t]])
        r = len(losses)
        assert float(row[1]) == pytest.approx(losses.mean(), abs=1e-12)
        assert float(row[2]) == pytest.approx(losses.std(ddof=1) / np.sqrt(r), abs=1e-12)
        assert float(row[3]) == pytest.approx(dists.mean(), abs=1e-12)
        assert float(row[4]) == pytest.approx(dists.std(ddof=1) / np.sqrt(r), abs=1e-12)


def test_resolve_policy_probes_oracle_constants(tmp_path):
    cfg = small_config(tmp_path / "auto", policy=OracleAuto(margin=2.0), steps=20)
    policy = resolve_policy(cfg)
    assert isinstance(policy, AdaptiveOracle)
    assert policy.beta_sq > 0 and policy.c_sq > 0
    result = run_experiment(cfg)
    # realized norms stay within the probed constants on this config
    for rec in result.records:
        assert rec.trace.max_device_grad_sq.max() <= result.policy.beta_sq
        assert rec.trace.w_norm_sq.max() <= result.policy.c_sq


# ------------------------------------------------------------------ compare


def test_compare_rows_and_pairing(tmp_path):
    cfg = small_config(tmp_path / "cmp", replicates=3, steps=10)
    result = compare_baselines(cfg, noise_levels=(0.5, 2.0))
    lines = result.path.read_text().splitlines()
    assert lines[0] == "noise_sigma_sq,method,seed,final_loss"
    assert len(lines) == 1 + 2 * 2 * 3  # levels x methods x seeds
    for level in (0.5, 2.0):
        recs_a = result.records[(level, "acfl")]
        recs_b = result.records[(level, "na")]
        for ra, rb in zip(recs_a, recs_b):
            assert ra.dataset_digest == rb.dataset_digest
            assert ra.coded_digest == rb.coded_digest
            assert ra.mask_digest == rb.mask_digest
            assert np.array_equal(ra.trace.w0, rb.trace.w0)
        assert 0.0 <= result.win_rates[level] <= 1.0


def test_compare_single_level_single_replicate(tmp_path):
    cfg = small_config(tmp_path / "cmp1", replicates=1, steps=4)
    result = compare_baselines(cfg, noise_levels=(1.0,))
    lines = result.path.read_text().splitlines()
    assert len(lines) == 3  # header + one row per method


def test_compare_rejects_empty_levels(tmp_path):
    cfg = small_config(tmp_path / "cmp2")
    with pytest.raises(ParameterError):
        compare_baselines(cfg, noise_levels=())


def test_compare_noiseless_sanity(tmp_path):
    # with zero noise and no stragglers the methods differ only in the
    # weights, and full-batch descent at 1/(lam t) drives both to ~0
    cfg = small_config(
        tmp_path / "clean",
        n_devices=5,
        m=12,
        d=4,
        straggler_p=0.0,
        schedule=None,
        steps=2000,
        replicates=2,
    )
    result = compare_baselines(cfg, noise_levels=(0.0,))
    for _, _, _, final_loss in result.rows:
        assert final_loss < 1e-6
