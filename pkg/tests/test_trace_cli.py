"""Config resolution, presets, trace files, experiment driver, CLI."""

import numpy as np
import pytest

from cibo import cli, runner
from cibo.config import (
    OUT_DIR_ENV,
    ConfigError,
    PRESETS,
    build_experiment,
    describe_presets,
    parse_config_text,
)
from cibo.loop import TraceRow
from cibo.runner import (
    aggregate_rows,
    read_aggregate,
    read_trace,
    run_experiment,
    write_aggregate,
    write_trace,
)

TINY = {
    "problem": "rastrigin",
    "dim": "2",
    "rounds": "2",
    "batch_size": "4",
    "init_size": "8",
    "buffer_size": "16",
    "filter_coef": "2",
    "lambda": "3",
    "beta": "1",
    "seeds": "2",
    "proxy_width": "8", "proxy_layers": "1", "proxy_ensemble": "2",
    "proxy_epochs": "2", "proxy_batch": "8",
    "flow_width": "8", "flow_layers": "1", "flow_epochs": "2",
    "flow_batch": "8", "flow_steps": "8",
    "sampler_width": "8", "sampler_layers": "1", "sampler_iters": "2",
    "sampler_batch": "8", "sampler_steps": "4",
}


def tiny_experiment(tmp_path, **over):
    mapping = {**TINY, "out_dir": str(tmp_path), **{k: str(v) for k, v in over.items()}}
    return build_experiment(mapping)


# -- config parsing and presets -------------------------------------------


def test_parse_config_text_roundtrip():
    text = """
    # a comment
    problem = rastrigin
    dim=20   # trailing comment
    lambda = 10
    """
    assert parse_config_text(text) == {"problem": "rastrigin", "dim": "20", "lambda": "10"}


def test_parse_config_text_reports_line_numbers():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("problem=rastrigin\nnot a pair\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("dim=\n")


def test_unknown_keys_rejected_with_catalog():
    with pytest.raises(ConfigError, match="unknown keys.*typo_key.*known keys"):
        build_experiment({**TINY, "typo_key": "1"})


def test_missing_problem_or_dim_rejected():
    with pytest.raises(ConfigError, match="problem"):
        build_experiment({"dim": "2"})
    with pytest.raises(ConfigError, match="dim"):
        build_experiment({"problem": "rastrigin"})


def test_bad_values_rejected():
    with pytest.raises(ConfigError, match="cannot parse"):
        build_experiment({**TINY, "rounds": "many"})
    with pytest.raises(ConfigError, match="method"):
        build_experiment({**TINY, "method": "annealing"})
    with pytest.raises(ConfigError, match="trace_format"):
        build_experiment({**TINY, "trace_format": "parquet"})
    with pytest.raises(ConfigError, match="preset"):
        build_experiment({"preset": "nope"})
    with pytest.raises(ConfigError, match="buffer_size"):
        build_experiment({**TINY, "buffer_size": "2"})


def test_full_scale_preset_values():
    exp = build_experiment({"preset": "rastrigin-200d"})
    run = exp.run
    assert (run.problem, run.dim, run.rounds, run.batch_size) == ("rastrigin", 200, 98, 100)
    assert (run.init_size, run.buffer_size, run.filter_coef) == (200, 2000, 10)
    assert (run.lam, run.beta, run.gamma) == (10.0, 1e5, 1.0)
    assert (run.proxy.width, run.proxy.hidden_layers, run.proxy.num_ensemble) == (1024, 3, 5)
    assert (run.proxy.epochs, run.proxy.batch_size, run.proxy.learning_rate) == (100, 256, 1e-3)
    assert (run.flow.width, run.flow.epochs, run.flow.integration_steps) == (512, 500, 250)
    assert (run.sampler.width, run.sampler.iterations, run.sampler.num_steps) == (256, 50, 50)
    assert run.sampler.off_policy is True
    assert exp.seeds == 4

    assert build_experiment({"preset": "ackley-200d"}).run.buffer_size == 3000

    rover = build_experiment({"preset": "rover-60d"}).run
    assert (rover.problem, rover.dim, rover.rounds, rover.batch_size) == ("rover", 60, 36, 50)
    assert (rover.lam, rover.buffer_size) == (3.0, 1000)


def test_desk_preset_values():
    run = build_experiment({"preset": "rastrigin-desk"}).run
    assert (run.dim, run.rounds, run.batch_size, run.init_size) == (20, 20, 20, 50)
    assert (run.buffer_size, run.filter_coef) == (150, 1)
    assert (run.proxy.width, run.flow.width, run.sampler.width) == (64, 128, 64)
    assert (run.proxy.epochs, run.flow.epochs, run.sampler.iterations) == (100, 600, 10)
    assert (run.flow.integration_steps, run.sampler.batch_size) == (50, 64)
    assert (run.lam, run.gamma, run.beta) == (2.0, 0.5, 1e5)
    assert build_experiment({"preset": "rover-desk"}).run.lam == 3.0


def test_presets_all_buildable_and_described():
    for name in PRESETS:
        exp = build_experiment({"preset": name})
        exp.run.validate()
    desc = describe_presets()
    assert set(desc) == set(PRESETS)
    assert "lambda=10" in desc["rastrigin-200d"]


def test_overrides_beat_preset():
    exp = build_experiment({"preset": "rastrigin-desk", "rounds": "5", "lambda": "0"})
    assert exp.run.rounds == 5
    assert exp.run.lam == 0.0


def test_env_var_overrides_out_dir(monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, "/tmp/env-wins")
    exp = build_experiment({**TINY, "out_dir": "/tmp/mapping"})
    assert exp.out_dir == "/tmp/env-wins"
    monkeypatch.delenv(OUT_DIR_ENV)
    exp = build_experiment({**TINY, "out_dir": "/tmp/mapping"})
    assert exp.out_dir == "/tmp/mapping"


def test_seed_template_expansion():
    exp = build_experiment({**TINY, "seed": "7"})
    assert exp.run_config_for_seed(9).seed == 9
    assert exp.run.seed == 7


# -- trace file IO ---------------------------------------------------------


def sample_rows():
    return [
        TraceRow(round=0, evals=12, best_feasible=None, regret=50.0,
                 feasibility_ratio=0.25, seconds=1.5),
        TraceRow(round=1, evals=16, best_feasible=1.0 / 3.0, regret=1.0 / 3.0,
                 feasibility_ratio=0.5, seconds=3.25),
    ]


def test_csv_trace_roundtrip_is_exact(tmp_path):
    path = tmp_path / "t.csv"
    write_trace(path, sample_rows(), "csv")
    text = path.read_text()
    assert text.splitlines()[0] == "round,evals,best_feasible,regret,feasibility_ratio,seconds"
    assert "nan" in text.splitlines()[1]
    assert "0.3333333333333333" in text.splitlines()[2]
    assert read_trace(path) == sample_rows()


def test_jsonl_trace_roundtrip_is_exact(tmp_path):
    path = tmp_path / "t.jsonl"
    write_trace(path, sample_rows(), "jsonl")
    assert "null" in path.read_text().splitlines()[0]
    assert read_trace(path) == sample_rows()


def test_trace_format_validation(tmp_path):
    with pytest.raises(ValueError, match="format"):
        write_trace(tmp_path / "t.xml", sample_rows(), "xml")
    bad = tmp_path / "t.csv"
    bad.write_text("wrong,header\n")
    with pytest.raises(ValueError, match="header"):
        read_trace(bad)


def test_aggregate_mean_and_population_std(tmp_path):
    a = sample_rows()
    b = [
        TraceRow(round=0, evals=12, best_feasible=2.0, regret=30.0,
                 feasibility_ratio=0.75, seconds=9.0),
        TraceRow(round=1, evals=16, best_feasible=2.0, regret=2.0,
                 feasibility_ratio=1.0, seconds=9.5),
    ]
    agg = aggregate_rows([a, b])
    assert agg[0]["regret_mean"] == 40.0
    assert agg[0]["regret_std"] == 10.0  # population (ddof=0), not sample
    assert agg[1]["feasibility_ratio_mean"] == 0.75
    path = tmp_path / "agg.csv"
    write_aggregate(path, agg, "csv")
    assert read_aggregate(path) == agg


def test_aggregate_rejects_mismatched_traces():
    a = sample_rows()
    with pytest.raises(ValueError, match="lengths"):
        aggregate_rows([a, a[:1]])
    shifted = [TraceRow(round=5, evals=12, best_feasible=None, regret=1.0,
                        feasibility_ratio=0.0, seconds=0.0),
               a[1]]
    with pytest.raises(ValueError, match="disagree"):
        aggregate_rows([a, shifted])
    with pytest.raises(ValueError, match="no traces"):
        aggregate_rows([])


# -- experiment driver -----------------------------------------------------


def test_experiment_writes_expected_files(tmp_path):
    exp = tiny_experiment(tmp_path)
    result = run_experiment(exp, clock=lambda: 0.0)
    assert sorted(result.seed_paths) == [0, 1]
    assert result.failures == {}
    for seed in (0, 1):
        path = tmp_path / f"cibo_rastrigin-2d_seed{seed}.csv"
        assert path.exists()
        assert read_trace(path) == result.rows[seed]
        assert len(result.rows[seed]) == 2
    agg_path = tmp_path / "cibo_rastrigin-2d_agg.csv"
    assert result.aggregate_path == agg_path
    reread = [read_trace(result.seed_paths[s]) for s in (0, 1)]
    assert read_aggregate(agg_path) == aggregate_rows(reread)


def test_experiment_reruns_byte_identical_under_stub_clock(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_experiment(tiny_experiment(out_a), clock=lambda: 0.0)
    run_experiment(tiny_experiment(out_b), clock=lambda: 0.0)
    for name in ("cibo_rastrigin-2d_seed0.csv", "cibo_rastrigin-2d_seed1.csv",
                 "cibo_rastrigin-2d_agg.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_experiment_real_clock_changes_only_seconds(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    ra = run_experiment(tiny_experiment(out_a))
    rb = run_experiment(tiny_experiment(out_b))
    for seed in (0, 1):
        for x, y in zip(ra.rows[seed], rb.rows[seed]):
            assert (x.round, x.evals, x.best_feasible, x.regret, x.feasibility_ratio) == (
                y.round, y.evals, y.best_feasible, y.regret, y.feasibility_ratio
            )


def test_random_search_files_share_budget_and_schema(tmp_path):
    cibo_res = run_experiment(tiny_experiment(tmp_path / "c"), clock=lambda: 0.0)
    rand_res = run_experiment(
        tiny_experiment(tmp_path / "r", method="random-search"), clock=lambda: 0.0
    )
    assert (tmp_path / "r" / "random-search_rastrigin-2d_seed0.csv").exists()
    for seed in (0, 1):
        evals_c = [row.evals for row in cibo_res.rows[seed]]
        evals_r = [row.evals for row in rand_res.rows[seed]]
        assert evals_c == evals_r


def test_failed_seed_is_isolated(tmp_path, monkeypatch):
    real = runner.run_optimization

    def sometimes_broken(cfg, clock=None, row_callback=None, surrogate_builder=None):
        if cfg.seed == 0:
            raise RuntimeError("injected failure")
        return real(cfg, clock=clock, row_callback=row_callback)

    monkeypatch.setattr(runner, "run_optimization", sometimes_broken)
    result = run_experiment(tiny_experiment(tmp_path), clock=lambda: 0.0)
    assert list(result.failures) == [0]
    assert "injected failure" in (tmp_path / "cibo_rastrigin-2d_seed0.error.txt").read_text()
    assert read_trace(tmp_path / "cibo_rastrigin-2d_seed0.csv") == []
    assert len(result.rows[1]) == 2  # the healthy seed still ran
    # Aggregate covers completed seeds only.
    assert result.aggregate_path is not None
    assert read_aggregate(result.aggregate_path) == aggregate_rows([result.rows[1]])


def test_jsonl_experiment_variant(tmp_path):
    exp = tiny_experiment(tmp_path, trace_format="jsonl", seeds=1)
    result = run_experiment(exp, clock=lambda: 0.0)
    path = tmp_path / "cibo_rastrigin-2d_seed0.jsonl"
    assert result.seed_paths[0] == path
    assert read_trace(path) == result.rows[0]
    assert result.aggregate_path == tmp_path / "cibo_rastrigin-2d_agg.jsonl"


# -- CLI -------------------------------------------------------------------


def write_tiny_config(tmp_path, **over):
    mapping = {**TINY, "out_dir": str(tmp_path / "runs"), **{k: str(v) for k, v in over.items()}}
    text = "\n".join(f"{k}={v}" for k, v in mapping.items()) + "\n"
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(text)
    return cfg_path


def test_cli_run_with_config_and_overrides(tmp_path, capsys):
    cfg_path = write_tiny_config(tmp_path, seeds=1)
    code = cli.main(["run", "--config", str(cfg_path), "--rounds", "1", "--seed", "3"])
    assert code == 0
    out = capsys.readouterr().out
    assert "seed 3: ok" in out
    trace = read_trace(tmp_path / "runs" / "cibo_rastrigin-2d_seed3.csv")
    assert len(trace) == 1  # CLI override beat the file's rounds=2


def test_cli_dashed_override_keys(tmp_path):
    cfg_path = write_tiny_config(tmp_path, seeds=1)
    code = cli.main(["run", "--config", str(cfg_path), "--batch-size", "5"])
    assert code == 0
    trace = read_trace(tmp_path / "runs" / "cibo_rastrigin-2d_seed0.csv")
    assert trace[0].evals == 8 + 5


def test_cli_list_problems(capsys):
    assert cli.main(["list-problems"]) == 0
    out = capsys.readouterr().out
    for name in ("rastrigin", "ackley", "rosenbrock", "rover"):
        assert name in out


def test_cli_list_presets(capsys):
    assert cli.main(["list-presets"]) == 0
    out = capsys.readouterr().out
    for name in PRESETS:
        assert name in out


def test_cli_config_errors_exit_1(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert "not found" in capsys.readouterr().err

    cfg_path = write_tiny_config(tmp_path)
    assert cli.main(["run", "--config", str(cfg_path), "--bogus", "1"]) == 1
    assert "unknown keys" in capsys.readouterr().err

    assert cli.main(["run", "--config", str(cfg_path), "--rounds"]) == 1
    assert "pairs" in capsys.readouterr().err


def test_cli_runtime_failure_exits_2(tmp_path, capsys, monkeypatch):
    real = runner.run_optimization

    def broken(cfg, clock=None, row_callback=None, surrogate_builder=None):
        raise RuntimeError("boom at runtime")

    monkeypatch.setattr(runner, "run_optimization", broken)
    cfg_path = write_tiny_config(tmp_path, seeds=1)
    assert cli.main(["run", "--config", str(cfg_path)]) == 2
    err = capsys.readouterr().err
    assert "boom at runtime" in err
