import json
import sys
import textwrap

import numpy as np
import pytest

from ifit.cli import main
from ifit.core import Bounds, Config
from ifit.external import ProtocolError, SubprocessSimulator
from ifit.harness import fit, read_result
from ifit.sampling import RngStream

FAST = {"n_init": 300, "n_elite": 30, "nfit_local": 300}

LINEAR_STUB = textwrap.dedent("""
    import json, sys
    import numpy as np
    A = np.array([1.0, -0.5, 0.25])
    B = np.array([[2.0, 0.0], [0.5, 1.0], [0.0, -1.5]])
    for line in sys.stdin:
        msg = json.loads(line)
        th = np.array(msg["theta"])
        rng = np.random.default_rng(msg["seed"])
        t = A + B @ th + 0.1 * rng.standard_normal(3)
        print(json.dumps({"t": t.tolist()}), flush=True)
""")


class InProcessLinear:
    """Same computation as LINEAR_STUB, driven by call seeds."""

    a = np.array([1.0, -0.5, 0.25])
    b = np.array([[2.0, 0.0], [0.5, 1.0], [0.0, -1.5]])
    bounds = Bounds([-2.0, -2.0], [2.0, 2.0])
    dim_theta, dim_stat = 2, 3

    def simulate_batch(self, thetas, seeds):
        return np.array([self.a + self.b @ th + 0.1 * np.random.default_rng(int(s)).standard_normal(3)
                         for th, s in zip(thetas, seeds)])


def _script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(body)
    return [sys.executable, str(path)]


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_missing_config_is_usage_error(tmp_path, capsys):
    assert main(["fit", "--model", "logit", "--seed", "1", "--out", str(tmp_path / "r.json")]) == 1
    assert "--config" in capsys.readouterr().err


def test_unknown_subcommand_and_model(tmp_path):
    assert main(["frobnicate"]) == 1
    cfg = _write(tmp_path, "c.json", FAST)
    assert main(["fit", "--model", "nope", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "r.json")]) == 1


def test_invalid_config_value(tmp_path):
    cfg = _write(tmp_path, "c.json", {"lambda_": 2.0})
    assert main(["fit", "--model", "logit", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "r.json")]) == 1


def test_fit_logit_and_diagnose(tmp_path, capsys):
    cfg = _write(tmp_path, "c.json", {})
    out = tmp_path / "r.json"
    code = main(["fit", "--model", "logit", "--config", cfg, "--seed", "3", "--out", str(out),
                 "--trace-csv", str(tmp_path / "t.csv"), "--scores-csv", str(tmp_path / "s.csv")])
    assert code == 0
    res = read_result(out)
    assert res.estimate.size == 4 and res.sh_pvalue is None
    text = capsys.readouterr().out
    assert "exactly identified" in text
    assert main(["diagnose", "--result", str(out)]) == 0
    assert "Sargan-Hansen" in capsys.readouterr().out
    assert (tmp_path / "s.csv").read_text().count("\n") == 5


def test_fit_toad_from_csv(tmp_path):
    rows = ["toad_id,day,position"]
    rng = np.random.default_rng(0)
    for a in range(10):
        pos = np.cumsum(rng.standard_cauchy(63) * 20)
        rows += [f"{a + 1},{d + 1},{pos[d]:.3f}" for d in range(63)]
    csv_path = tmp_path / "toads.csv"
    csv_path.write_text("\n".join(rows) + "\n")
    cfg = _write(tmp_path, "c.json", {})
    out = tmp_path / "r.json"
    assert main(["fit", "--model", "toad", "--toad-csv", str(csv_path), "--config", cfg,
                 "--seed", "1", "--out", str(out)]) == 0
    res = read_result(out)
    assert res.estimate.size == 3 and res.std_scores.size == 88


def test_nonconvergence_exit_code_writes_partial(tmp_path):
    cfg = _write(tmp_path, "c.json", dict(FAST, max_local_iters=1))
    out = tmp_path / "r.json"
    assert main(["fit", "--model", "logit", "--config", cfg, "--seed", "1", "--out", str(out)]) == 2
    assert read_result(out).converged is False


def test_exec_model_matches_in_process(tmp_path):
    argv = _script(tmp_path, "stub.py", LINEAR_STUB)
    t_obs = np.array([1.6, 0.15, -0.5])
    cfg = Config(**FAST)
    with SubprocessSimulator(argv, InProcessLinear.bounds, 3, timeout=30) as sim:
        ext = fit(sim, t_obs, cfg, stream=RngStream(9))
    ref = fit(InProcessLinear(), t_obs, cfg, stream=RngStream(9))
    assert ext.to_dict() == ref.to_dict()
    # exact solution of the linear system a + B theta = t_obs (consistent)
    assert ext.converged
    np.testing.assert_allclose(ext.estimate, [0.3, 0.5], atol=0.1)


def test_exec_model_through_cli(tmp_path):
    stub = tmp_path / "stub.py"
    stub.write_text(LINEAR_STUB)
    obs = _write(tmp_path, "obs.json", {"t": [1.6, 0.15, -0.5]})
    cfg = _write(tmp_path, "c.json", FAST)
    out = tmp_path / "r.json"
    code = main(["fit", "--model", f"exec:{sys.executable} {stub}", "--obs", obs,
                 "--lower=-2,-2", "--upper=2,2", "--config", cfg, "--seed", "9", "--out", str(out)])
    assert code == 0
    assert read_result(out).estimate.size == 2


def test_exec_requires_bounds(tmp_path):
    obs = _write(tmp_path, "obs.json", {"t": [0.0]})
    cfg = _write(tmp_path, "c.json", FAST)
    assert main(["fit", "--model", "exec:true", "--obs", obs, "--config", cfg, "--seed", "1",
                 "--out", str(tmp_path / "r.json")]) == 1


def test_wrong_length_is_protocol_error(tmp_path):
    argv = _script(tmp_path, "bad.py", textwrap.dedent("""
        import json, sys
        for line in sys.stdin:
            print(json.dumps({"t": [0.0, 1.0]}), flush=True)
    """))
    with SubprocessSimulator(argv, Bounds([0.0], [1.0]), 3, timeout=10) as sim:
        with pytest.raises(ProtocolError, match="length 2, expected 3"):
            sim.call([0.5], 1)
    obs = _write(tmp_path, "obs.json", {"t": [0.0, 0.0, 0.0]})
    cfg = _write(tmp_path, "c.json", FAST)
    code = main(["fit", "--model", f"exec:{sys.executable} {tmp_path / 'bad.py'}", "--obs", obs,
                 "--lower", "0", "--upper", "1", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "r.json")])
    assert code == 3


def test_malformed_json_is_protocol_error(tmp_path):
    argv = _script(tmp_path, "junk.py", "import sys\nfor line in sys.stdin:\n    print('hello', flush=True)\n")
    with SubprocessSimulator(argv, Bounds([0.0], [1.0]), 1, timeout=10) as sim:
        with pytest.raises(ProtocolError, match="malformed"):
            sim.call([0.5], 1)


def test_timeout_restarts_and_retries(tmp_path):
    marker = tmp_path / "slept"
    argv = _script(tmp_path, "slow.py", textwrap.dedent(f"""
        import json, os, sys, time
        for line in sys.stdin:
            if not os.path.exists({str(marker)!r}):
                open({str(marker)!r}, "w").close()
                time.sleep(30)
            th = json.loads(line)["theta"]
            print(json.dumps({{"t": th}}), flush=True)
    """))
    with SubprocessSimulator(argv, Bounds([0.0], [1.0]), 1, timeout=2.0) as sim:
        np.testing.assert_array_equal(sim.call([0.25], 1), [0.25])
    assert marker.exists()


def test_repeated_timeout_is_model_error(tmp_path):
    from ifit.core import ModelError

    argv = _script(tmp_path, "hang.py", "import time\ntime.sleep(60)\n")
    with SubprocessSimulator(argv, Bounds([0.0], [1.0]), 1, timeout=0.5) as sim:
        with pytest.raises(ModelError, match="timed out twice"):
            sim.call([0.5], 1)


def test_batch_over_several_children_keeps_order(tmp_path):
    argv = _script(tmp_path, "echo.py", textwrap.dedent("""
        import json, sys
        for line in sys.stdin:
            msg = json.loads(line)
            print(json.dumps({"t": [msg["theta"][0], float(msg["seed"] % 1000)]}), flush=True)
    """))
    thetas = np.linspace(0, 1, 7)[:, None]
    seeds = np.arange(7) + 100
    with SubprocessSimulator(argv, Bounds([0.0], [1.0]), 2, timeout=10, workers=3) as sim:
        out = sim.simulate_batch(thetas, seeds)
    np.testing.assert_array_equal(out, np.column_stack([thetas[:, 0], seeds]))
