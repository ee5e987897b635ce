import json
import math

import pytest

from hdapprox.cli import (
    EXIT_CELL_ERRORS,
    EXIT_FAILURE,
    EXIT_OK,
    ExperimentConfig,
    ScalingRun,
    emit_csv,
    emit_json,
    fit_from_csv,
    main,
    run_experiment,
)
from hdapprox.error import ConfigError
from hdapprox.models.registry import registry
from hdapprox.utils.io_utils import RUN_CSV_COLUMNS


stirling_grid = [10, 20, 50, 100, 200, 500, 1000]


def _config(**kwargs):
    d = {
        "experiment": "laplace-scaling",
        "model": "stirling",
        "n_grid": stirling_grid,
        "p_rule": {"kind": "fixed", "p": 1},
    }
    d.update(kwargs)
    return ExperimentConfig.from_dict(d)


def _write_config(tmp_path, **kwargs):
    d = {
        "model": "stirling",
        "n_grid": stirling_grid,
        "p_rule": {"kind": "fixed", "p": 1},
        "output": str(tmp_path / "run.csv"),
    }
    d.update(kwargs)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(d))
    return str(path)


def _read(path):
    with open(path, "rb") as source:
        return source.read()


def test_config_rejects_bad_input():
    with pytest.raises(ConfigError):
        _config(colour="blue")
    with pytest.raises(ConfigError):
        _config(p_rule={"kind": "power", "alpha": 1.0})
    with pytest.raises(ConfigError):
        _config(n_grid=[10, 0])
    with pytest.raises(ConfigError):
        _config(model="no-such-model")
    with pytest.raises(ConfigError):
        _config(model="gamma-cgf")
    with pytest.raises(ConfigError):
        _config(experiment="marginal", oracle="importance-sampling")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"experiment": "laplace-scaling", "model": "stirling"})


def test_config_grid():
    config = _config(
        model="logistic", n_grid=[400, 100], p_rule={"kind": "power", "alpha": 0.5}, replicates=2
    )
    assert config.p_for(100) == 10
    assert config.p_for(400) == 20
    assert config.grid() == [(100, 10, 0), (100, 10, 1), (400, 20, 0), (400, 20, 1)]
    assert ExperimentConfig.from_dict(config.to_dict()) == config


def test_gaussian_laplace_is_exact():
    config = _config(
        model="gaussian", n_grid=[50, 100], p_rule={"kind": "fixed", "p": 4}, oracle="closed-form"
    )
    run = run_experiment(config)
    assert len(run.cells) == 2
    for cell in run.cells:
        assert cell["error"] is None
        assert cell["rel_error"] < 1e-8


def test_stirling_scaling():
    run = run_experiment(_config())
    assert run.error_count == 0
    assert math.isnan(run.fitted.a)
    assert run.fitted.b == pytest.approx(-1.0, abs=0.15)


def test_csv_output(tmp_path):
    config = _config()
    path = str(tmp_path / "empty.csv")
    emit_csv(ScalingRun(config, []), path)
    with open(path) as source:
        lines = source.read().splitlines()
    assert lines == [",".join(RUN_CSV_COLUMNS)]

    run = run_experiment(_config(n_grid=[10, 20]))
    path = str(tmp_path / "two.csv")
    emit_csv(run, path)
    with open(path) as source:
        assert len(source.read().splitlines()) == 3


def test_csv_refit(tmp_path):
    run = run_experiment(_config())
    path = str(tmp_path / "run.csv")
    emit_csv(run, path)
    refit = fit_from_csv(path)
    assert refit.b == pytest.approx(run.fitted.b, abs=1e-12)
    assert refit.se_b == pytest.approx(run.fitted.se_b, abs=1e-12)


def test_output_is_reproducible(tmp_path):
    config = _config(
        model="logistic",
        n_grid=[100, 200, 400],
        p_rule={"kind": "fixed", "p": 2},
        replicates=2,
        oracle="quadrature",
        seed=11,
    )
    outputs = []
    for threads in (1, 1, 3):
        path = str(tmp_path / f"run-{len(outputs)}.csv")
        run = run_experiment(config, threads=threads)
        emit_csv(run, path)
        emit_json(run, path + ".json")
        outputs.append((_read(path), _read(path + ".json")))
    assert outputs[0] == outputs[1] == outputs[2]


def test_main_exit_codes(tmp_path):
    config = _write_config(tmp_path)
    assert main(["laplace-scaling", "--config", config]) == EXIT_OK
    with open(tmp_path / "run.csv.json") as source:
        summary = json.load(source)
    assert summary["errors"] == 0
    assert summary["fitted"]["a"] is None

    assert main(["laplace-scaling", "--config", str(tmp_path / "missing.json")]) == EXIT_FAILURE
    mismatched = _write_config(tmp_path, experiment="laplace-scaling")
    assert main(["marginal", "--config", mismatched]) == EXIT_FAILURE
    unknown = _write_config(tmp_path, colour="blue")
    assert main(["laplace-scaling", "--config", unknown]) == EXIT_FAILURE

    config = _write_config(
        tmp_path, model="exp-regression", n_grid=[50], p_rule={"kind": "fixed", "p": 2}
    )
    assert main(["saddlepoint-exactness", "--config", config]) == EXIT_CELL_ERRORS


def test_main_overrides(tmp_path):
    config = _write_config(tmp_path, n_grid=[10, 20])
    out = str(tmp_path / "other.csv")
    assert main(["laplace-scaling", "--config", config, "--out", out, "--seed", "3"]) == EXIT_OK
    with open(out + ".json") as source:
        assert json.load(source)["config"]["seed"] == 3


def test_prediction_in_summary(tmp_path):
    run = run_experiment(_config(prediction="fixed-p"))
    path = str(tmp_path / "run.csv")
    emit_json(run, path + ".json")
    with open(path + ".json") as source:
        summary = json.load(source)
    assert summary["prediction"]["exponent_n"] == -1
    assert len(summary["predicted"]) == len(stirling_grid)


def test_double_saddle_experiment():
    config = ExperimentConfig.from_dict(
        {
            "experiment": "double-saddle",
            "model": "exp-means",
            "n_grid": [40],
            "p_rule": {"kind": "fixed", "p": 2},
            "seed": 5,
            "experiment_params": {"fractions": [0.3, 0.5, 0.7]},
        }
    )
    run = run_experiment(config)
    assert len(run.cells) == 3
    for cell in run.cells:
        assert cell["error"] is None
        assert cell["method"].startswith("double-saddle-renormalized@")
        assert cell["rel_error"] < 1e-6


def test_saddlepoint_exactness_experiment():
    config = ExperimentConfig.from_dict(
        {
            "experiment": "saddlepoint-exactness",
            "model": "normal-cgf",
            "n_grid": [5, 50],
            "p_rule": {"kind": "fixed", "p": 3},
        }
    )
    run = run_experiment(config)
    assert len(run.cells) == 6
    assert max(c["rel_error"] for c in run.cells) < 1e-10

    config = ExperimentConfig.from_dict(
        {
            "experiment": "saddlepoint-exactness",
            "model": "gamma-cgf",
            "n_grid": [5],
            "p_rule": {"kind": "fixed", "p": 1},
            "experiment_params": {"renormalize": True},
        }
    )
    run = run_experiment(config)
    assert all(c["method"].startswith("saddlepoint-renormalized@") for c in run.cells)
    assert max(c["rel_error"] for c in run.cells) < 1e-8


def test_marginal_experiment():
    config = ExperimentConfig.from_dict(
        {
            "experiment": "marginal",
            "model": "gaussian",
            "n_grid": [30, 60],
            "p_rule": {"kind": "fixed", "p": 2},
        }
    )
    run = run_experiment(config)
    assert run.error_count == 0
    assert max(c["rel_error"] for c in run.cells) < 1e-7


def test_diagnose_experiment(tmp_path):
    config = _write_config(
        tmp_path, model="quadratic", n_grid=[50, 100], p_rule={"kind": "fixed", "p": 3}
    )
    assert main(["diagnose", "--config", config]) == EXIT_OK
    with open(tmp_path / "run.csv.json") as source:
        summary = json.load(source)
    assert summary["fitted"] is None
    assert [r["n"] for r in summary["reports"]] == [50, 100]
    assert summary["reports"][0]["eta1"] == pytest.approx(1.0, abs=1e-10)
    assert summary["reports"][0]["c3_hat"] is None


def test_timing_fills_runtime():
    run = run_experiment(_config(n_grid=[10]), timing=True)
    assert run.cells[0]["runtime_ms"] >= 0.0


def test_config_accepts_registered_models():
    for tag, model_spec in registry.items():
        experiment = "saddlepoint-exactness" if model_spec.kind == "cumulant" else "diagnose"
        config = _config(experiment=experiment, model=tag)
        assert config.model == tag
    run = run_experiment(
        _config(model="quadratic", n_grid=[20, 40], p_rule={"kind": "fixed", "p": 2})
    )
    assert run.error_count == 0
    assert [c["p"] for c in run.cells] == [2, 2]


def test_unknown_model_params_become_cell_errors():
    config = _config(
        experiment="saddlepoint-exactness",
        model="gamma-cgf",
        n_grid=[5],
        model_params={"colour": "blue"},
    )
    run = run_experiment(config)
    assert len(run.cells) > 0
    assert run.error_count == len(run.cells)
    assert all("colour" in c["error"] for c in run.cells)


@pytest.mark.slow
def test_logistic_scaling_trend():
    config = _config(
        model="logistic",
        n_grid=[250, 500, 1000, 2000],
        p_rule={"kind": "power", "alpha": 0.3},
        replicates=5,
        oracle="importance-sampling",
        oracle_params={"draws": 200000},
        seed=1,
    )
    assert [config.p_for(n) for n in config.n_grid] == [5, 6, 8, 10]
    run = run_experiment(config, threads=4)
    assert run.error_count == 0
    errors = {}
    for cell in run.cells:
        errors.setdefault(cell["n"], []).append(cell["rel_error"])
    means = [sum(errors[n]) / len(errors[n]) for n in sorted(errors)]
    assert all(later < earlier for earlier, later in zip(means, means[1:]))
    assert 1.0 <= run.fitted.a <= 3.0
    assert -1.5 <= run.fitted.b <= -0.5
