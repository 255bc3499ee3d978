import json

import numpy as np
import pytest

from measure_filter.cli import main
from measure_filter.io import (
    ConfigError,
    RawFloat,
    dumps,
    load_run_config,
    load_state,
    loads,
    read_dataset,
    save_state,
)
from measure_filter.measures import (
    AtomRegistry,
    BaseMeasure,
    DwFilterState,
    Gaussian,
)

UNIFORM = {"family": "uniform", "a": 0.0, "b": 1.0}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_floats_have_17_digits_and_round_trip():
    text = dumps({"x": 0.1, "y": [1.0 / 3.0, 2], "z": "a"})
    assert text == '{"x":0.10000000000000001,"y":[0.33333333333333331,2],"z":"a"}'
    assert dumps(loads(text)) == text


def test_raw_times_are_verbatim(tmp_path):
    data = tmp_path / "d.jsonl"
    data.write_text('{"t": 1.50, "obs": [0.5]}\n{"t": 2e0, "obs": []}\n')
    batches = read_dataset(data)
    assert [dumps(t) for t, _ in batches] == ["1.50", "2e0"]
    assert isinstance(batches[0][0], RawFloat) and batches[0][0] == 1.5


def test_state_round_trip_is_byte_identical(tmp_path):
    state = DwFilterState(BaseMeasure(1.5, Gaussian(0.0, 2.0)), AtomRegistry((0.1, -0.3)),
                          [[1, 0], [0, 2]], [0.25, 0.75], beta=2.0, s=1.0 / 3.0)
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    save_state(state, first)
    save_state(load_state(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_run_config_rejects_unknown_keys(tmp_path):
    path = write(tmp_path / "c.json", {"model": "fv", "theta": 1.0, "p0": UNIFORM, "extra": 1})
    with pytest.raises(ConfigError, match="extra"):
        load_run_config(path)


def test_run_config_defaults(tmp_path):
    cfg = load_run_config(write(tmp_path / "c.json", {"model": "fv", "theta": 1.0, "p0": UNIFORM}))
    assert cfg.prune_eps == 1e-8 and cfg.sigma_speed == 1.0
    assert cfg.dw_weight_mode == "full_marginal" and cfg.dw_binomial_convention == "survivor"


def test_simulate_is_byte_reproducible(tmp_path):
    cfg = write(tmp_path / "s.json", {"model": "fv", "theta": 1.0, "p0": UNIFORM,
                                       "schedule": [[0, 4], [1, 4]], "seed": 3})
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 2
    prov = json.loads((tmp_path / "a.jsonl.provenance.json").read_text())
    assert prov["config"]["seed"] == 3


def test_simulate_bad_theta_exits_2(tmp_path, capsys):
    cfg = write(tmp_path / "s.json", {"model": "fv", "theta": 0, "p0": UNIFORM,
                                       "schedule": [[0, 4]]})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "theta" in capsys.readouterr().err


def test_filter_two_component_example(tmp_path):
    # a component that kept atom 0.5 and one that lost it, then a repeat of 0.5
    cfg = write(tmp_path / "c.json", {"model": "fv", "theta": 1.0, "p0": UNIFORM, "prune_eps": 0})
    data = tmp_path / "d.jsonl"
    gap = float(-2 * np.log(0.5))  # survival e^{-gap/2} = 1/2
    data.write_text(f'{{"t": 0, "obs": [0.5]}}\n{{"t": {gap!r}, "obs": [0.5]}}\n')
    out = tmp_path / "r.jsonl"
    assert main(["filter", "--config", cfg, "--data", str(data), "--out", str(out)]) == 0
    lines = [json.loads(x) for x in out.read_text().splitlines()]
    weights = sorted(c["w"] for c in lines[1]["components"])
    assert weights == pytest.approx([1 / 3, 2 / 3], abs=1e-14)
    assert lines[1]["weight_fullinfo"] == pytest.approx(1 / 3, abs=1e-14)
    assert "summary" in lines[-1]


def test_filter_empty_dataset_echoes_prior(tmp_path):
    cfg = write(tmp_path / "c.json", {"model": "dw", "theta": 1.0, "p0": UNIFORM, "beta": 1.0})
    data = tmp_path / "d.jsonl"
    data.write_text("")
    out = tmp_path / "r.jsonl"
    assert main(["filter", "--config", cfg, "--data", str(data), "--out", str(out)]) == 0
    summary = json.loads(out.read_text())["summary"]
    assert summary["total_logml"] == 0 and summary["final_components"] == [{"counts": {}, "w": 1}]


def test_filter_exit_codes(tmp_path):
    good = write(tmp_path / "c.json", {"model": "fv", "theta": 1.0, "p0": UNIFORM})
    data = tmp_path / "d.jsonl"
    data.write_text('{"t": 1, "obs": [0.5]}\n{"t": 0.5, "obs": []}\n')
    out = str(tmp_path / "r.jsonl")
    assert main(["filter", "--config", good, "--data", str(data), "--out", out]) == 4
    bad = write(tmp_path / "b.json", {"model": "fv", "theta": -1, "p0": UNIFORM})
    assert main(["filter", "--config", bad, "--data", str(data), "--out", out]) == 2


def test_resource_cap_exit_3(tmp_path, monkeypatch):
    from measure_filter import cli
    from measure_filter.lattice import DownSetTooLarge

    def boom(*_a, **_k):
        raise DownSetTooLarge(10**8, 10**7)

    monkeypatch.setattr(cli, "fv_filter", boom)
    cfg = write(tmp_path / "c.json", {"model": "fv", "theta": 1.0, "p0": UNIFORM})
    data = tmp_path / "d.jsonl"
    data.write_text('{"t": 0, "obs": [0.5]}\n')
    assert main(["filter", "--config", cfg, "--data", str(data), "--out",
                 str(tmp_path / "r")]) == 3


def test_threads_flag_and_env(tmp_path, monkeypatch):
    cfg = write(tmp_path / "c.json", {"model": "cir", "alpha": [2.0], "beta": 1.0})
    data = tmp_path / "d.jsonl"
    data.write_text('{"t": 0, "obs": [1, 2]}\n{"t": 1, "obs": [0]}\n')
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["--threads", "1", "filter", "--config", cfg, "--data", str(data),
                 "--out", str(a)]) == 0
    monkeypatch.setenv("MEASURE_FILTER_THREADS", "4")
    assert main(["filter", "--config", cfg, "--data", str(data), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("MEASURE_FILTER_THREADS", "zero")
    assert main(["filter", "--config", cfg, "--data", str(data), "--out", str(b)]) == 2


def test_validate_writes_report(tmp_path):
    report = tmp_path / "r.json"
    code = main(["validate", "--suite", "stability", "--report", str(report)])
    body = json.loads(report.read_text())
    assert body["suite"] == "stability"
    assert code == (0 if body["passed"] else 1)
    assert all("criterion" in c for c in body["checks"])
