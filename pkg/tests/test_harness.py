import csv

import numpy as np
import pytest
from click.testing import CliRunner

from noma_robust import harness
from noma_robust.channel import Scenario
from noma_robust.cli import main
from noma_robust.config import ConfigError, KEYS, format_config, parse_config
from noma_robust.harness import (
    ExperimentConfig, empirical_cdf, histogram, run_power_sweep, run_sinr_distribution,
)

EASY = dict(M=4, K=2, pathloss_exp=0.0, shadow_std_db=0.0, seed=3)


def easy_cfg(tmp_path, **kw):
    base = dict(scenario=Scenario(**EASY), schemes=("robust", "nonrobust", "oma"),
                gamma_sweep_db=(0.0, 6.0), epsilon_list=(0.02, 0.06), trials=4,
                out_dir=tmp_path, timestamp=False)
    base.update(kw)
    return ExperimentConfig(**base)


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_cdf_examples():
    assert dict(empirical_cdf([1, 2, 3]))[2.0] == pytest.approx(2 / 3)
    assert empirical_cdf([5, 5, 5]) == [(5.0, 1.0)]
    with pytest.raises(ValueError):
        empirical_cdf([])


def test_cdf_ks_bound():
    v = np.random.default_rng(0).random(10_000)
    knots = empirical_cdf(v)
    x = np.array([k for k, _ in knots])
    p = np.array([q for _, q in knots])
    # right-continuous steps: compare both sides of every jump
    dev = np.maximum(np.abs(p - x), np.abs(np.concatenate([[0], p[:-1]]) - x))
    assert dev.max() <= 0.02


def test_cdf_monotone_to_one():
    knots = empirical_cdf(np.random.default_rng(1).standard_normal(500))
    p = [q for _, q in knots]
    assert all(b >= a for a, b in zip(p, p[1:])) and p[-1] == 1.0


def test_histogram_mass():
    v = np.random.default_rng(2).standard_normal(300)
    edges, mass, dens = histogram(v)
    assert mass.size >= 20
    assert mass.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(dens * np.diff(edges), mass)
    edges, mass, _ = histogram([3.0])
    assert mass.sum() == pytest.approx(1.0)


def test_config_round_trip():
    cfg = parse_config("M = 4\nK=2 # users\n\nschemes = robust, oma\n"
                       "gamma_sweep_db = 0, 2.5\n")
    assert cfg["M"] == 4 and cfg["schemes"] == ("robust", "oma")
    assert cfg["gamma_sweep_db"] == (0.0, 2.5)
    assert cfg["epsilon_list"] == (cfg["epsilon"],)
    assert parse_config(format_config(cfg)) == cfg
    assert set(cfg) == set(KEYS)


@pytest.mark.parametrize("text", ["foo = 1", "M = 2\nM = 3", "M = x", "schemes = tdma",
                                  "trials = 0", "just words"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_experiment_config_validation(tmp_path):
    with pytest.raises(ValueError):
        easy_cfg(tmp_path, trials=0)
    with pytest.raises(ValueError):
        easy_cfg(tmp_path, schemes=())
    assert easy_cfg(tmp_path, feasible_only=True).max_scan == 400


def test_power_sweep_outputs(tmp_path):
    stats = run_power_sweep(easy_cfg(tmp_path))
    rows = read_rows(tmp_path / "power_sweep.csv")
    assert rows[0] == harness.STABLE_FIELDS
    assert len(rows) - 1 == 4 * 3 * 2 * 2
    assert (tmp_path / "power_summary.csv").exists()
    assert (tmp_path / "timing.csv").exists()
    # paired channels: the non-robust design does not depend on epsilon
    by = {}
    for r in stats.records:
        if r.scheme == "nonrobust" and r.optimal:
            by.setdefault((r.trial_index, r.gamma_db), set()).add(r.sdp_power_linear)
    assert by and all(len(v) == 1 for v in by.values())
    for r in stats.records:
        if r.optimal:
            assert r.rank_ratio_max <= 1e-4 or r.rank_flag
        else:
            assert np.isnan(r.total_power_linear)
    raw = (tmp_path / "power_sweep.csv").read_bytes()
    assert b"\r" not in raw and not raw.startswith(b"#")


def test_power_ordering_small(tmp_path):
    stats = run_power_sweep(easy_cfg(tmp_path, feasible_only=True))
    for g in (0.0, 6.0):
        non = stats.cell("nonrobust", 0.02, g).mean_power_linear
        r2 = stats.cell("robust", 0.02, g).mean_power_linear
        r6 = stats.cell("robust", 0.06, g).mean_power_linear
        oma = stats.cell("oma", 0.06, g).mean_power_linear
        assert non <= r2 * (1 + 1e-7) <= r6 * (1 + 1e-7)
        assert oma > r6
    assert stats.cell("robust", 0.06, 6.0).mean_power_linear > \
        stats.cell("robust", 0.06, 0.0).mean_power_linear


def test_sinr_distribution_outputs(tmp_path):
    cfg = easy_cfg(tmp_path, gamma_sweep_db=(6.0,), epsilon_list=(0.06,), trials=6)
    stats = run_sinr_distribution(cfg)
    for name in ("sinr_trials.csv", "sinr_cdf.csv", "sinr_pdf.csv", "power_summary.csv"):
        assert (tmp_path / name).exists()
    for key, (edges, mass, _) in stats.pdf.items():
        assert mass.sum() == pytest.approx(1.0, abs=1e-9)
        assert stats.cdf[key][-1][1] == 1.0


def test_workers_do_not_change_output(tmp_path):
    outs = []
    for w in (1, 3):
        d = tmp_path / f"w{w}"
        run_power_sweep(easy_cfg(d, workers=w, feasible_only=True, trials=3))
        outs.append((d / "power_sweep.csv").read_bytes())
    assert outs[0] == outs[1]


def test_timestamp_line(tmp_path):
    run_power_sweep(easy_cfg(tmp_path, trials=1, timestamp=True, schemes=("nonrobust",)))
    assert (tmp_path / "power_sweep.csv").read_text().startswith("# generated ")


def test_unwritable_out_dir_fails_before_solving(tmp_path, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("x")

    def boom(*a, **k):
        raise AssertionError("solved before checking the output directory")

    monkeypatch.setattr(harness, "design", boom)
    with pytest.raises(OSError):
        run_power_sweep(easy_cfg(blocker / "out"))


def write_config(path, **extra):
    lines = [f"{k} = {v}" for k, v in {**EASY, "epsilon": 0.02, "gamma_min_db": 3.0,
                                       "trials": 2, **extra}.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_cli_sweep_and_sinr(tmp_path):
    cfg = write_config(tmp_path / "exp.cfg", schemes="robust, nonrobust")
    runner = CliRunner()
    res = runner.invoke(main, ["sweep", "--config", str(cfg), "--out", str(tmp_path / "a"),
                               "--no-timestamp"])
    assert res.exit_code == 0, res.output
    assert "trials kept: 2" in res.output
    res = runner.invoke(main, ["sinr-dist", "--config", str(cfg), "--out",
                               str(tmp_path / "b"), "--trials", "3", "--seed", "9"])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "b" / "sinr_cdf.csv").exists()


def test_cli_design_and_certify(tmp_path):
    cfg = write_config(tmp_path / "exp.cfg")
    runner = CliRunner()
    out = tmp_path / "d.csv"
    res = runner.invoke(main, ["design", "--config", str(cfg), "--out", str(out)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["certify", "--design", str(out), "--epsilon", "0.02"])
    assert res.exit_code == 0, res.output
    rows = list(csv.reader(res.output.splitlines()))
    assert rows[0][0] == "layer_user" and len(rows) == 1 + 3
    assert all(r[5] == "1" for r in rows[1:])
    # a larger error ball than designed for breaks the guarantee
    res = runner.invoke(main, ["certify", "--design", str(out), "--epsilon", "0.5"])
    assert res.exit_code == 1


def test_cli_bad_config(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nope = 1\n")
    res = CliRunner().invoke(main, ["sweep", "--config", str(bad)])
    assert res.exit_code != 0 and "unknown key" in res.output
