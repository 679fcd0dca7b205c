#!/usr/bin/env python3
"""Build the hedgelab_py extension module and exercise it end to end:
config round-trip, environment stepping with the PNL identity, in-memory
training, run artifacts, checkpoint evaluation, self-comparison, and
dashboard export."""

import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]

TINY = {
    "sac.hidden": "16,16",
    "sac.batch_size": "32",
    "sac.replay_capacity": "2048",
    "sac.warmup_steps": "64",
    "sac.steps_per_epoch": "64",
    "sac.epochs": "2",
}


def build_module() -> None:
    subprocess.run(["cargo", "build", "-p", "hedgelab-py"], cwd=ROOT, check=True)
    so = ROOT / "target" / "debug" / "libhedgelab_py.so"
    shutil.copyfile(so, pathlib.Path(__file__).parent / "hedgelab_py.so")


def tiny_config(hl, mode: str):
    cfg = hl.ExperimentConfig(mode)
    for key, value in TINY.items():
        cfg.set(key, value)
    cfg.seed = 7
    return cfg


def check_env(hl) -> None:
    cfg = tiny_config(hl, "single")
    env = hl.HedgeEnv(cfg)
    obs = env.reset(3)
    assert len(obs) == env.obs_dim == 1
    assert env.act_dim == 1 and len(env.bounds()) == 1
    done = False
    while not done:
        obs, reward, done, timeout = env.step(env.heuristic_action())
    rows = env.records()
    assert len(rows) <= env.horizon and rows[-1]["done"]
    for row in rows:
        total = row["client_pnl"] + row["hedge_pnl"] + row["market_pnl"]
        assert math.isclose(total, row["net_pnl"], rel_tol=0, abs_tol=1e-9 * max(1.0, abs(row["net_pnl"])))
    print(f"env ok: {len(rows)} steps, final net PNL {rows[-1]['net_pnl']:.2f}")

    pcfg = tiny_config(hl, "portfolio")
    penv = hl.PortfolioEnv(pcfg)
    penv.reset(4)
    penv.step([1.0, -1.0])
    prow = penv.records()[-1]
    assert "portfolio_value" in prow and "overhedge" in prow
    print("portfolio env ok")


def check_config_roundtrip(hl) -> None:
    cfg = tiny_config(hl, "skew")
    text = cfg.to_text()
    again = hl.ExperimentConfig.from_text(text)
    assert again.to_text() == text
    assert again.mode == "skew"
    try:
        cfg.set("bogus.key", "1")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")
    print("config round-trip ok")


def check_training_pipeline(hl) -> None:
    cfg = tiny_config(hl, "single")
    agent, metrics = hl.train(cfg)
    assert len(metrics) == 2 and agent.act_dim == 1
    action = agent.act([0.0])
    assert len(action) == 1

    with tempfile.TemporaryDirectory() as tmp:
        run_cfg = tiny_config(hl, "single")
        run_cfg.out_dir = f"{tmp}/run"
        run_dir = pathlib.Path(hl.run_training(run_cfg))
        names = sorted(p.name for p in run_dir.iterdir())
        assert names == ["checkpoint.bin", "config.txt", "episode.csv", "metrics.jsonl"], names

        ckpt = run_dir / "checkpoint.bin"
        summary = hl.evaluate(ckpt, 2, 3)
        assert summary["episodes"] == 2 and summary["mean_reward"] is not None
        loaded = hl.SacAgent.load(ckpt)
        assert loaded.evaluate(2, 3) == summary

        report = hl.compare(ckpt, ckpt, 2, 5)
        assert len(report["rows"]) == 2
        assert report["rows"][0]["reward_a"] == report["rows"][0]["reward_b"]

        svg = pathlib.Path(hl.export_run(run_dir))
        assert svg.read_text().startswith("<svg ")
    print(f"pipeline ok: eval mean reward {summary['mean_reward']:.2f}")


def check_metrics(hl) -> None:
    assert hl.sharpe_ratio([0.0, 1.0, 3.0, 2.0]) is not None
    assert hl.sharpe_ratio([5.0, 5.0, 5.0, 5.0]) is None
    try:
        hl.sharpe_ratio([1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("short series accepted")
    print("metrics ok")


def main() -> int:
    build_module()
    sys.path.insert(0, str(pathlib.Path(__file__).parent))
    import hedgelab_py as hl

    check_config_roundtrip(hl)
    check_env(hl)
    check_metrics(hl)
    check_training_pipeline(hl)
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
