"""CLI tests: config loading, flag overrides, and each subcommand end to end."""

import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from tpclab.cli import apply_overrides, build_parser, load_config, main
from tpclab.harness import ConfigError, SimConfig, run_ber
from tpclab.model import ModelDims, random_weights, save_weights
from tpclab.thresholds import load_threshold_table, save_threshold_table

TOY = ["--preset", "ehamming_8_4", "--n-t", "2", "--p", "3",
       "--block-frames", "16", "--seed", "7", "--target-errors", "0"]


def toy_sim(**kw):
    base = dict(preset="ehamming_8_4", n_t=2, p=3, block_frames=16,
                master_seed=7, target_errors=0)
    base.update(kw)
    return SimConfig(**base)


def write_yaml(path, payload):
    path.write_text(yaml.safe_dump(payload))
    return str(path)


def test_load_config_roundtrip(tmp_path):
    path = write_yaml(tmp_path / "sim.yaml", {
        "preset": "ehamming_8_4", "frames": 10, "es_n0_db": [1.0, 2.0],
        "policy": {"kind": "top1", "mu1": [0.1, 0.2, 0.3, 0.4]}})
    cfg = load_config(path)
    assert cfg.preset == "ehamming_8_4"
    assert cfg.frames == 10
    assert cfg.es_n0_db == (1.0, 2.0)
    assert cfg.policy.kind == "top1"
    assert cfg.policy.mu1 == (0.1, 0.2, 0.3, 0.4)


def test_load_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write_yaml(tmp_path / "a.yaml", {"framez": 1}))
    assert exc.value.key == "framez"
    with pytest.raises(ConfigError) as exc:
        load_config(write_yaml(tmp_path / "b.yaml",
                               {"policy": {"kinds": "oracle"}}))
    assert exc.value.key == "policy.kinds"
    with pytest.raises(ConfigError) as exc:
        load_config(write_yaml(tmp_path / "c.yaml", {"policy": 3}))
    assert exc.value.key == "policy"
    with pytest.raises(ConfigError) as exc:
        load_config(write_yaml(tmp_path / "d.yaml", [1, 2]))
    assert exc.value.key == "config"


def _parse(argv):
    return build_parser().parse_args(argv)


def test_apply_overrides_snr_and_policy():
    args = _parse(["simulate", "--snr", "1.0,2.5", "--policy", "oracle",
                   "--frames", "9"])
    cfg = apply_overrides(SimConfig(), args)
    assert cfg.es_n0_db == (1.0, 2.5)
    assert cfg.policy.kind == "oracle"
    assert cfg.frames == 9


def test_thresholds_flag_loads_table(tmp_path):
    tbl = tmp_path / "mu.json"
    save_threshold_table(tbl, "top1", [0.5, 0.6, 0.7, 0.8])
    cfg = apply_overrides(SimConfig(), _parse(["simulate",
                                               "--thresholds", str(tbl)]))
    assert cfg.policy.kind == "top1"
    assert cfg.policy.mu1 == (0.5, 0.6, 0.7, 0.8)
    with pytest.raises(ConfigError) as exc:
        apply_overrides(SimConfig(), _parse(
            ["simulate", "--thresholds", str(tbl), "--policy", "top2"]))
    assert exc.value.key == "thresholds"


def test_simulate_stdout_matches_harness(capsys):
    rc = main(["simulate", *TOY, "--snr", "1.0", "--frames", "32"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "snr_db,frames,bits,bit_errors,ber,ci_low,ci_high"
    parts = lines[1].split(",")
    r, = run_ber(toy_sim(es_n0_db=(1.0,), frames=32))
    assert float(parts[0]) == 1.0
    assert int(parts[1]) == r.frames == 32
    assert int(parts[3]) == r.bit_errors
    assert float(parts[4]) == r.ber


def test_simulate_csv_file(tmp_path, capsys):
    out = tmp_path / "ber.csv"
    rc = main(["simulate", *TOY, "--snr", "1.0", "--frames", "16",
               "--out", str(out)])
    assert rc == 0
    assert "snr +1.00 dB" in capsys.readouterr().out
    assert out.read_text().startswith("snr_db,")
    assert (tmp_path / "ber.csv.manifest.json").exists()


def test_simulate_config_file_and_override(tmp_path, capsys):
    cfg_path = write_yaml(tmp_path / "sim.yaml", {
        "preset": "ehamming_8_4", "n_t": 2, "p": 3, "frames": 16,
        "es_n0_db": [1.0], "target_errors": 0, "block_frames": 16,
        "master_seed": 7})
    assert main(["simulate", "--config", cfg_path]) == 0
    assert capsys.readouterr().out.splitlines()[1].split(",")[1] == "16"
    assert main(["simulate", "--config", cfg_path, "--frames", "8"]) == 0
    assert capsys.readouterr().out.splitlines()[1].split(",")[1] == "8"


def test_config_errors_exit_2(tmp_path, capsys):
    bad = write_yaml(tmp_path / "bad.yaml", {"framez": 1})
    assert main(["simulate", "--config", bad]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert main(["simulate", "--preset", "golay_24_12"]) == 2
    assert "preset" in capsys.readouterr().err


def test_missing_weight_file_exits_1(tmp_path, capsys):
    rc = main(["eval-model", "--weights", str(tmp_path / "missing.bin"),
               "--dataset", str(tmp_path / "missing.jsonl")])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_optimize_thresholds_and_reuse(tmp_path, capsys):
    tbl = tmp_path / "mu.json"
    rc = main(["optimize-thresholds", *TOY, "--snr", "-2.0", "--frames", "16",
               "--kind", "top1", "--budget", "8", "--out", str(tbl)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "top1: ber" in out and "mu[1]" in out
    kind, mu, meta = load_threshold_table(tbl)
    assert kind == "top1"
    assert len(mu) == 4
    assert meta["evals"] and meta["ber"] is not None
    assert main(["simulate", *TOY, "--snr", "-2.0", "--frames", "16",
                 "--thresholds", str(tbl)]) == 0
    capsys.readouterr()
    assert main(["simulate", *TOY, "--snr", "-2.0", "--frames", "16",
                 "--thresholds", str(tbl), "--policy", "top2"]) == 2


def test_gen_training_data_cli(tmp_path, capsys):
    ds = tmp_path / "train.jsonl"
    rc = main(["gen-training-data", *TOY, "--snr", "-4.0", "--frames", "16",
               "--t", "1", "--out", str(ds), "--training-snr", ""])
    assert rc == 0
    assert "wrote" in capsys.readouterr().out
    recs = [json.loads(line) for line in ds.read_text().splitlines()]
    assert recs and all(r["t"] == 1 for r in recs)
    rc = main(["gen-training-data", *TOY, "--frames", "8", "--t", "1",
               "--out", str(tmp_path / "mix.jsonl"), "--training-snr", "0,2"])
    assert rc == 0


def _saved_weights(tmp_path, seed=5):
    w = random_weights(ModelDims(p=3, n=8), n_t=2, seed=seed)
    path = tmp_path / f"w{seed}.bin"
    save_weights(path, w)
    return str(path)


def test_eval_model_cli(tmp_path, capsys):
    ds = tmp_path / "train.jsonl"
    assert main(["gen-training-data", *TOY, "--snr", "-4.0", "--frames", "12",
                 "--t", "1", "--out", str(ds), "--training-snr", ""]) == 0
    capsys.readouterr()
    rc = main(["eval-model", "--weights", _saved_weights(tmp_path),
               "--dataset", str(ds)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "decision accuracy" in out and "t=1:" in out


def test_export_and_replay_fixtures(tmp_path, capsys):
    wp = _saved_weights(tmp_path)
    fx = tmp_path / "fx.jsonl"
    rc = main(["export-fixtures", "--weights", wp, "--out", str(fx),
               "--count", "24"])
    assert rc == 0
    recs = [json.loads(line) for line in fx.read_text().splitlines()]
    assert len(recs) == 24
    for r in recs:
        assert 1 <= r["t"] <= 4
        assert np.isfinite(r["v"])
        assert len(r["j"]) == 8 * (8 + 1)
    capsys.readouterr()
    assert main(["export-fixtures", "--weights", wp,
                 "--replay", str(fx)]) == 0
    assert "0 beyond rtol" in capsys.readouterr().out
    other = _saved_weights(tmp_path, seed=6)
    assert main(["export-fixtures", "--weights", other,
                 "--replay", str(fx)]) == 1


def test_export_needs_out(tmp_path, capsys):
    rc = main(["export-fixtures", "--weights", _saved_weights(tmp_path)])
    assert rc == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tpclab", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
