import io
import json
import subprocess
import sys
from contextlib import redirect_stdout

import pytest

from sacesim import __version__
from sacesim.cli import EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, main
from sacesim.config import check_divides, parse_config
from sacesim.errors import ConfigError

SMALL = """
[model]
a0 = 0
a1 = 1
a2 = 0
a3 = 1

[noise]
kind = power_law
decay = 1
beta = 1

[scheme]
N = 8
tau = 0.1
K = 4

[initial]
preset = sine

[run]
M = 3
master_seed = 11
save_stride = 2
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue()


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.scheme.n_modes == 64 and cfg.scheme.tau == 0.1
        assert cfg.params.a1 == 1.0 and cfg.drift
        assert cfg.run.format == "csv"
        assert cfg.echo["scheme.N"] == "64"

    def test_minimal_white_noise(self):
        cfg = parse_config("[noise]\nkind = white\nbeta = 0.5\n[scheme]\nN = 64\ntau = 0.1\nK = 10\n")
        assert cfg.spectrum.kind == "white" and cfg.scheme.beta == 0.5

    def test_dissipativity(self):
        with pytest.raises(ConfigError, match="L_F = 20"):
            parse_config("[model]\na1 = 20\n")

    def test_white_beta_one(self):
        with pytest.raises(ConfigError, match="regularity"):
            parse_config("[noise]\nkind = white\nbeta = 1\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="model.a4"):
            parse_config("[model]\na4 = 1\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="extras"):
            parse_config("[extras]\nx = 1\n")

    @pytest.mark.parametrize(
        "text",
        [
            "[scheme]\nN = eight\n",
            "[model]\ndrift = maybe\n",
            "[run]\nformat = xml\n",
            "[run]\nM = 0\n",
            "[run]\nsave_stride = 3\n",
            "[scheme]\nvariant = rk4\n",
            "[initial]\npreset = blob\n",
            "[run]\nfunctional = mode_k:0\n",
            "no section header\n",
        ],
    )
    def test_malformed(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_drift_free_and_lists(self):
        cfg = parse_config("[model]\ndrift = false\n[run]\ntau_list = 0.5, 0.25\nn_list = 4;8\np = 2\n")
        assert cfg.params is None
        assert cfg.run.tau_list == [0.5, 0.25]
        assert cfg.run.n_list == [4, 8]
        assert cfg.run.p == [2]

    def test_coefficients_initial(self):
        cfg = parse_config("[scheme]\nN = 4\n[initial]\ncoeffs = 1, 2\nscale = 0.5\n")
        assert list(cfg.u0.coeffs) == [0.5, 1.0, 0.0, 0.0]

    def test_check_divides(self):
        assert check_divides(0.0625, 2**-11, "x") == 128
        with pytest.raises(ConfigError):
            check_divides(0.1, 0.03, "x")


class TestMain:
    def test_self_test(self):
        code, out = _run(["self-test"])
        assert code == EXIT_OK
        assert "FAIL" not in out and out.count("PASS") >= 9

    def test_simulate_csv(self, tmp_path):
        code, out = _run(["simulate", "--config", _write(tmp_path, SMALL), "--threads", "1"])
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "# artifact=simulate"
        assert f"# version={__version__}" in lines
        assert "# seed=11" in lines
        assert any(l.startswith("# config={") for l in lines)
        body = [l for l in lines if not l.startswith("#")]
        assert body[0].startswith("sample,step,t,functional,c1")
        # M = 3 samples, K = 4 steps saved every 2 -> 2 rows each
        assert len(body) == 1 + 6
        assert [r.split(",")[1] for r in body[1:3]] == ["2", "4"]

    def test_simulate_single_save(self, tmp_path):
        text = SMALL.replace("save_stride = 2", "save_stride = 4")
        code, out = _run(["simulate", "--config", _write(tmp_path, text)])
        body = [l for l in out.splitlines() if not l.startswith("#")]
        assert code == EXIT_OK and len(body) == 1 + 3

    def test_seed_override_and_json(self, tmp_path):
        code, out = _run(["simulate", "--config", _write(tmp_path, SMALL), "--seed", "5", "--format", "json"])
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["seed"] == 5 and doc["config"]["run.master_seed"] == "5"
        assert doc["artifact"] == "simulate" and len(doc["rows"]) == 6
        assert isinstance(doc["rows"][0]["t"], float)

    def test_bad_seed(self, tmp_path):
        code, _ = _run(["simulate", "--config", _write(tmp_path, SMALL), "--seed", "-1"])
        assert code == EXIT_CONFIG

    def test_threads_byte_identical(self, tmp_path):
        text = SMALL.replace("M = 3", "M = 600") + "tau_list = 0.2, 0.1\ntau_ref = 0.05\n"
        text = text.replace("K = 4", "K = 4")
        path = _write(tmp_path, text)
        outs = []
        for t in ("1", "3"):
            dest = tmp_path / f"out{t}.csv"
            code, _ = _run(["weak-error", "--config", path, "--threads", t, "--out", str(dest)])
            assert code == EXIT_OK
            outs.append(dest.read_bytes())
        assert outs[0] == outs[1]
        header = [l for l in outs[0].decode().splitlines() if not l.startswith("#")][0]
        assert header == "tau,N,mean,stderr,error_vs_ref,error_stderr"

    def test_weak_error_divisibility(self, tmp_path):
        text = SMALL + "tau_list = 0.1\ntau_ref = 0.03\n"
        code, _ = _run(["weak-error", "--config", _write(tmp_path, text)])
        assert code == EXIT_CONFIG

    def test_config_errors(self, tmp_path):
        assert _run(["simulate", "--config", _write(tmp_path, "[model]\na1 = 20\n")])[0] == EXIT_CONFIG
        assert _run(["simulate", "--config", _write(tmp_path, "[noise]\nkind = white\nbeta = 1\n")])[0] == EXIT_CONFIG
        assert _run(["simulate", "--config", str(tmp_path / "missing.ini")])[0] == EXIT_CONFIG

    def test_unwritable_output(self, tmp_path):
        code, _ = _run(["simulate", "--config", _write(tmp_path, SMALL), "--out", str(tmp_path / "no" / "x.csv")])
        assert code == EXIT_CONFIG

    def test_untamed_blowup(self, tmp_path):
        text = SMALL.replace("[initial]\npreset = sine", "[initial]\npreset = sine\nscale = 1000")
        text = text.replace("K = 4", "K = 10\nvariant = untamed_exp_euler").replace("save_stride = 2", "save_stride = 1")
        code, out = _run(["simulate", "--config", _write(tmp_path, text)])
        assert code == EXIT_BLOWUP
        assert "# n_diverged=3" in out

    @pytest.mark.parametrize(
        "cmd, extra",
        [
            ("spatial-error", "n_list = 2, 4\nn_ref = 16\n"),
            ("moments", "M = 1000\np = 2, 4\n"),
            ("ergodic", ""),
            ("invariant", ""),
        ],
    )
    def test_other_commands(self, tmp_path, cmd, extra):
        text = SMALL.replace("M = 3\n", "") + extra
        if "M = " not in extra:
            text += "M = 20\n"
        text = text.replace("K = 4", "K = 40").replace("tau = 0.1", "tau = 0.05")
        text = text.replace("[initial]\npreset = sine", "[initial]\npreset = sine\npreset_b = zero")
        text = text.replace("save_stride = 2", "save_stride = 1")
        if cmd == "invariant":
            text += "burn_in = 0.6\n"
        code, out = _run([cmd, "--config", _write(tmp_path, text), "--format", "json"])
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["artifact"] == cmd and doc["rows"]

    def test_console_script(self):
        res = subprocess.run([sys.executable, "-m", "sacesim.cli", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "self-test" in res.stdout
