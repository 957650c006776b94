import json
import math

import numpy as np
import pytest
import yaml

from oqw.cli import ConfigError, RunConfig, decode_matrix, encode_matrix, main, parse_config, read_moments


def write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def test_minimal_config_defaults():
    cfg = parse_config("{model: circle-example, mode: discrete, n_steps: 100}")
    assert cfg.n_steps == 100
    assert cfg.record_every == RunConfig.record_every and cfg.scheme == "rk4" and cfg.params == {}


@pytest.mark.parametrize("text,key", [
    ("{model: circle-example, mode: discrete, n_steps: -5}", "n_steps"),
    ("{model: circle-example, mode: discrete, nsteps: 5}", "nsteps"),
    ("{model: circle-example, mode: discrete, params: {gama_se: 1}}", "params"),
    ("{model: square, mode: discrete}", "model"),
    ("{model: circle-example, mode: walk}", "mode"),
    ("{model: circle-example, mode: continuous, dt: 0}", "dt"),
    ("{model: circle-example, mode: discrete, loop_form: second}", "loop_form"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.key == key


def test_caption_config():
    cfg = parse_config({"model": "circle-example", "mode": "discrete", "n_steps": 5000,
                        "params": {"n_mean": 1, "gamma_se": 0.1, "lambda_field": 0.3, "delta": 0.05}})
    from oqw.cli import resolve
    r = resolve(cfg)
    assert (r.params.gamma_se, r.params.lambda_field, r.params.delta, r.params.n_mean) == (0.1, 0.3, 0.05, 1)


def test_overrides():
    cfg = parse_config({"model": "circle-example", "mode": "discrete"}, ["params.n_mean=5", "n_steps=7"])
    assert cfg.params == {"n_mean": 5} and cfg.n_steps == 7


def test_matrix_codec():
    a = np.array([[1 + 2j, 0.1], [3, -1j]])
    assert np.array_equal(decode_matrix(encode_matrix(a), "m"), a)
    with pytest.raises(ConfigError):
        decode_matrix([[1, 2]], "m")


def test_derive_contains_printed_b(tmp_path):
    cfg = write(tmp_path, {"model": "circle-example", "params": {"n_mean": 1}, "loop_form": "first_order"})
    assert main(["derive", "--config", cfg, "--out", str(tmp_path / "d")]) == 0
    data = json.loads((tmp_path / "d" / "table.json").read_text())
    assert data["#"].startswith("oqw config_hash=")
    edge = next(e for e in data["edges"] if e["src"] == 51 and e["dst"] == 52)
    (op,) = edge["ops"]
    assert math.isclose(op[0][1][0], math.sqrt(0.05 * 0.1 * 2), rel_tol=1e-15)
    assert data["max_defect"] < 10 * 0.05 ** 2


def test_round_trip_is_byte_identical(tmp_path):
    base = {"model": "circle-example", "params": {"n_mean": 1, "M": 31, "start_node": 16}, "n_steps": 60}
    cfg = write(tmp_path, base)
    assert main(["derive", "--config", cfg, "--out", str(tmp_path / "d")]) == 0
    assert main(["discrete", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    inline = write(tmp_path, {"table": str(tmp_path / "d" / "table.json"), "n_steps": 60,
                              "initial": {"node": 16, "state": "half_identity"}}, "inline.yaml")
    assert main(["discrete", "--config", inline, "--out", str(tmp_path / "b")]) == 0
    for name in ("snapshots.csv", "moments.csv"):
        a = (tmp_path / "a" / name).read_text().splitlines()
        b = (tmp_path / "b" / name).read_text().splitlines()
        assert a[0].startswith("# oqw config_hash=") and b[0].startswith("# oqw config_hash=")
        assert a[1:] == b[1:]


def test_trajectories_deterministic(tmp_path):
    cfg = write(tmp_path, {"model": "circle-example", "params": {"n_mean": 0}, "n_steps": 300,
                           "n_traj": 1, "record_every": 50})
    for out in ("x", "y"):
        assert main(["trajectories", "--config", cfg, "--seed", "7", "--out", str(tmp_path / out)]) == 0
    for name in ("trajectory_7.csv", "ensemble.csv", "ensemble_moments.csv", "resolved-config.yaml"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()
    rows = (tmp_path / "x" / "trajectory_7.csv").read_text().splitlines()
    assert rows[1].startswith("step,node,label,trace")
    nodes = [int(r.split(",")[1]) for r in rows[2:]]
    assert all(b - a in (0, 1) for a, b in zip(nodes, nodes[1:]))


def test_continuous_then_analyze(tmp_path):
    cfg = write(tmp_path, {"model": "circle-example", "params": {"n_mean": 1, "M": 201, "start_node": 101},
                           "t_final": 500, "dt": 0.1, "record_every": 20})
    assert main(["continuous", "--config", cfg, "--out", str(tmp_path / "c")]) == 0
    m = read_moments(tmp_path / "c" / "moments.csv")
    assert m["t"][-1] == 500 and not m["wrapped"].any()
    acfg = write(tmp_path, {"model": "circle-example", "params": {"n_mean": 1},
                            "input": str(tmp_path / "c" / "moments.csv")}, "a.yaml")
    assert main(["analyze", "--config", acfg, "--out", str(tmp_path / "a")]) == 0
    rep = json.loads((tmp_path / "a" / "rates.json").read_text())
    assert abs(rep["relative_error"]["v_mu"]) < 0.03
    assert abs(rep["relative_error"]["v_sigma2_exact"]) < 0.05


def test_csv_round_trips_doubles(tmp_path):
    from oqw.discrete import WalkState, run
    from oqw.microscopic import build_generator, discretize, eigen_decompose_coins
    from oqw.observables import moments_from_snapshots
    from oqw.presets import ChainExampleParams, chain_model, initial_state
    cfg = write(tmp_path, {"model": "chain-example", "n_steps": 3, "record_every": 1})
    assert main(["discrete", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    m = read_moments(tmp_path / "o" / "moments.csv")
    p = ChainExampleParams()
    model = chain_model(p)
    t = discretize(build_generator(model, eigen_decompose_coins(model)), p.delta, p.loop_form)
    ms = moments_from_snapshots(run(t, initial_state(p), 3))
    assert np.array_equal(m["mu"], ms.mu) and np.array_equal(m["var"], ms.var)
    assert np.array_equal(m["P_50"], ms.occupation[:, 49])


def test_main_reports_errors(tmp_path, capsys):
    cfg = write(tmp_path, {"model": "circle-example", "n_steps": -5})
    assert main(["discrete", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("oqw: error mode=discrete model=circle-example key=n_steps")
    assert len(err.splitlines()) == 1
    cfg = write(tmp_path, {"model": "circle-example", "mode": "derive"}, "m.yaml")
    assert main(["discrete", "--config", cfg]) == 2
    bad = write(tmp_path, {"model": "circle-example", "dt": 5.0, "t_final": 10}, "b.yaml")
    assert main(["continuous", "--config", bad, "--out", str(tmp_path / "b")]) == 1
    assert "StepSizeError" in capsys.readouterr().err


def test_inline_model(tmp_path):
    sz = [[[-0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]]
    sm = [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]
    model = {"graph": {"topology": "circle", "M": 9}, "omega": sz,
             "coins": [{"src": i, "dst": i % 9 + 1, "op": sm} for i in range(1, 10)],
             "bath": {"mean_photon_number": 1, "gamma_se": 0.1, "reference_frequency": 1.0}}
    cfg = write(tmp_path, {"model": model, "delta": 0.05, "n_steps": 20,
                           "initial": {"node": 5, "rho": [[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]]}})
    assert main(["discrete", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    m = read_moments(tmp_path / "o" / "moments.csv")
    assert abs(sum(m[f"P_{i}"][-1] for i in range(1, 10)) - 1) < 1e-12
    bad = dict(model, colour="red")
    cfg = write(tmp_path, {"model": bad, "delta": 0.05, "initial": {"node": 5, "state": "ground"}}, "bad.yaml")
    assert main(["discrete", "--config", cfg]) == 2
