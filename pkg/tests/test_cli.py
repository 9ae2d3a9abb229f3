import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mgate import cli, csvio, metrics, model
from mgate.config import load_config

GAMMA = model.RB_D2_GAMMA

SCHEME_GAMMA = """[scheme]
units = gamma_units
gamma_MHz = 6
delta1 = 15
delta3 = 15
eps12 = 0.01
eps34 = 0.01
omega1 = 4
omega4 = 4
G_p = {G}
G_t = {G}
gamma = {gamma}
"""


def write(path, text):
    path.write_text(text)
    return str(path)


def small_cfg(tmp_path, G=22, gamma=1, t_max=0.6, n=61, extra=""):
    body = SCHEME_GAMMA.format(G=G, gamma=gamma) + f"\n[time]\nt_max = {t_max}\nn_samples = {n}\n" + extra
    return write(tmp_path / "run.cfg", body)


def run(argv):
    return cli.main(argv)


def read(path):
    return path.read_text()


def test_simulate_bundled_cfg(tmp_path):
    out = tmp_path / "o"
    assert run(["simulate", "--config", "paper.cfg", "--out", str(out), "--svg"]) == 0
    header, rows = csvio.read_rows(out / "metrics.csv")
    assert header == list(metrics.CSV_HEADER)
    assert len(rows) == 400
    crossed = [r[0] * GAMMA for r in rows if abs(abs(r[5]) - math.pi) < 0.02 * math.pi]
    assert crossed and 0.2 <= min(crossed) <= 0.6
    assert (out / "cps.svg").read_text().startswith("<svg") and (out / "fidelity.svg").exists()


def test_simulate_is_byte_identical(tmp_path):
    cfg = small_cfg(tmp_path)
    run(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    run(["simulate", "--config", cfg, "--out", str(tmp_path / "b")])
    assert read(tmp_path / "a" / "metrics.csv") == read(tmp_path / "b" / "metrics.csv")


def test_csv_formatting(tmp_path):
    cfg = small_cfg(tmp_path, n=5)
    run(["simulate", "--config", cfg, "--out", str(tmp_path)])
    lines = read(tmp_path / "metrics.csv").splitlines()
    for cell in lines[1].split(","):
        mantissa = cell.split("e")[0].lstrip("-").replace(".", "")
        assert len(mantissa) >= 12 and "," not in cell


def test_zero_coupling_config(tmp_path):
    cfg = small_cfg(tmp_path, G=0, gamma=0)
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, rows = csvio.read_rows(tmp_path / "metrics.csv")
    for r in rows:
        assert r[1:6] == [0.0] * 5
        assert r[6] == pytest.approx(1, abs=1e-12) and r[7] == pytest.approx(1, abs=1e-12)


def test_unit_round_trip(tmp_path):
    gamma_cfg = small_cfg(tmp_path, n=31)
    g = 2 * math.pi * 6.0
    rad = {"delta1": 15 * g, "delta3": 15 * g, "eps12": 0.01 * g, "eps34": 0.01 * g,
           "omega1": 4 * g, "omega4": 4 * g, "G_p": 22 * g, "G_t": 22 * g, "gamma": 1 * g}
    body = "[scheme]\nunits = rad_per_us\n" + "".join(f"{k} = {v!r}\n" for k, v in rad.items())
    body += f"\n[time]\nt_max = {0.6 / g!r}\nn_samples = 31\n"
    rad_cfg = write(tmp_path / "rad.cfg", body)
    mhz = body.replace("rad_per_us", "MHz_times_2pi")
    for k, v in rad.items():
        mhz = mhz.replace(f"{k} = {v!r}", f"{k} = {v / (2 * math.pi)!r}")
    mhz_cfg = write(tmp_path / "mhz.cfg", mhz)
    for name, cfg in (("g", gamma_cfg), ("r", rad_cfg)):
        assert run(["simulate", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    assert read(tmp_path / "g" / "metrics.csv") == read(tmp_path / "r" / "metrics.csv")
    a, b = load_config(gamma_cfg).params, load_config(mhz_cfg).params
    for f in ("delta1", "delta2", "omega1", "G_p"):
        assert getattr(a, f) == pytest.approx(getattr(b, f), rel=1e-14)


def test_json_config(tmp_path):
    data = {"scheme": {"units": "gamma_units", "delta1": 15, "delta3": 15, "eps12": 0.01, "eps34": 0.01,
                       "omega1": 4, "omega4": 4, "G_p": 22, "G_t": 22, "gamma": 1},
            "time": {"t_max": 0.6, "n_samples": 61}}
    js = write(tmp_path / "run.json", json.dumps(data))
    ini = small_cfg(tmp_path)
    run(["simulate", "--config", js, "--out", str(tmp_path / "j")])
    run(["simulate", "--config", ini, "--out", str(tmp_path / "i")])
    assert read(tmp_path / "j" / "metrics.csv") == read(tmp_path / "i" / "metrics.csv")


@pytest.mark.parametrize("text", [
    "[scheme]\ndelta1 = 1\n",  # no units
    "[scheme]\nunits = furlongs\n",
    SCHEME_GAMMA.format(G=1, gamma=1) + "typo_key = 3\n[time]\nt_max = 1\n",
    SCHEME_GAMMA.format(G=1, gamma=1) + "[time]\nt_max = 1\nn_samples = 1\n",
    SCHEME_GAMMA.format(G=-1, gamma=1) + "[time]\nt_max = 1\n",
    "not an ini file",
])
def test_config_errors_exit_2(tmp_path, text, capsys):
    cfg = write(tmp_path / "bad.cfg", text)
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert run(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 2
    assert run(["simulate"]) == 2


def test_perturbative_dispersive(capsys):
    assert run(["perturbative", "--config", "dispersive.cfg"]) == 0
    line = capsys.readouterr().out.strip()
    phi = float(line.split()[0].split("=")[1])
    assert phi == pytest.approx(-4.317535320901493e-04, rel=1e-9)
    assert 3e-4 <= abs(phi) <= 5e-4


def test_perturbative_linear_in_t_and_zero_eps(tmp_path, capsys):
    base = ("[scheme]\nunits = rad_per_us\ndelta1 = 1900\ndelta3 = 1900\neps12 = {e}\neps34 = {e}\n"
            "omega1 = 65\nomega4 = 65\nG_p = 0.5\nG_t = 0.5\ngamma = 37.7\n[time]\nt_max = {t}\n")
    values = []
    for e, t in ((1.9, 100), (1.9, 200), (0, 100)):
        run(["perturbative", "--config", write(tmp_path / "p.cfg", base.format(e=e, t=t))])
        values.append(float(capsys.readouterr().out.split()[0].split("=")[1]))
    assert values[1] == pytest.approx(2 * values[0], rel=1e-12)
    assert values[2] == 0


def test_perturbative_singular_exit_4(tmp_path):
    text = ("[scheme]\nunits = rad_per_us\ndelta1 = 100\ndelta3 = 100\neps12 = 4\neps34 = 4\n"
            "omega1 = 20\nomega4 = 20\nG_p = 0.5\nG_t = 0.5\n[time]\nt_max = 1\n")
    assert run(["perturbative", "--config", write(tmp_path / "s.cfg", text)]) == 4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_integration_failure_exit_3(tmp_path, monkeypatch, capsys):
    import scipy.integrate
    from mgate import dynamics
    real = scipy.integrate.solve_ivp
    t_fail = 0.3 / GAMMA

    def patched(fun, t_span, y0, **kw):
        return real(lambda t, y: fun(t, y) if t < t_fail else np.full_like(y, np.nan), t_span, y0, **kw)

    monkeypatch.setattr(dynamics.scipy.integrate, "solve_ivp", patched)
    assert run(["simulate", "--config", small_cfg(tmp_path), "--out", str(tmp_path)]) == 3
    assert "error" in capsys.readouterr().err
    header, rows = csvio.read_rows(tmp_path / "metrics.csv")
    assert header == list(metrics.CSV_HEADER) and 1 <= len(rows) < 61
    assert rows[-1][0] <= t_fail


def sweep_cfg(tmp_path, sec, t_max=1.0, n=101):
    return small_cfg(tmp_path, t_max=t_max, n=n, extra="\n[sweep]\n" + sec)


def test_sweep_single_point_equals_simulate(tmp_path):
    cfg = sweep_cfg(tmp_path, "parameter = G_p,G_t\nstart = 22\nstop = 22\ncount = 1\nrecord_at = 0.4\n"
                    "metrics = cps_unwrapped,fid_det,fid_cond,p_success\n", t_max=0.4, n=41)
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, rows = csvio.read_rows(tmp_path / "sweep.csv")
    assert header == ["param_value", "flag", "t", "cps_unwrapped", "fid_det", "fid_cond", "p_success"]
    run(["simulate", "--config", cfg, "--out", str(tmp_path / "sim")])
    _, sim = csvio.read_rows(tmp_path / "sim" / "metrics.csv")
    assert rows[0][1] == "ok"
    assert rows[0][2:] == [sim[-1][0], sim[-1][5], sim[-1][6], sim[-1][7], sim[-1][8]]


def test_sweep_log_grid_and_parallel_order(tmp_path):
    cfg = sweep_cfg(tmp_path, "parameter = omega1,omega4\nstart = 2\nstop = 8\ncount = 4\nscale = log\n"
                    "record_at = 0.3\n", t_max=0.3, n=31)
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path / "s"), "--jobs", "1"]) == 0
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path / "p"), "--jobs", "3"]) == 0
    serial = read(tmp_path / "s" / "sweep.csv")
    assert serial == read(tmp_path / "p" / "sweep.csv")
    _, rows = csvio.read_rows(tmp_path / "s" / "sweep.csv")
    vals = [r[0] for r in rows]
    assert vals[0] == pytest.approx(2) and vals[-1] == pytest.approx(8)
    assert np.all(np.diff(vals) > 0) and np.allclose(np.diff(np.log(vals)), np.log(4) / 3)


def test_sweep_flags_missing_crossing(tmp_path):
    cfg = sweep_cfg(tmp_path, "parameter = G_p,G_t\nstart = 0\nstop = 22\ncount = 2\n")
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, rows = csvio.read_rows(tmp_path / "sweep.csv")
    assert rows[0][1] == "no-crossing" and math.isnan(rows[0][3])
    assert rows[1][1] == "ok"


def test_sweep_bad_parameter_exit_2(tmp_path):
    cfg = sweep_cfg(tmp_path, "parameter = wibble\nstart = 0\nstop = 1\ncount = 2\n")
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_sweep_coupling_trade_off(tmp_path):
    cfg = sweep_cfg(tmp_path, "parameter = G_p,G_t\nstart = 18\nstop = 26\ncount = 3\n"
                    "metrics = cps_unwrapped,fid_det\n", t_max=1.2, n=241)
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path), "--jobs", "3"]) == 0
    _, rows = csvio.read_rows(tmp_path / "sweep.csv")
    assert all(r[1] == "ok" for r in rows)
    times = [r[2] for r in rows]
    fids = [r[4] for r in rows]
    assert times[0] > times[1] > times[2]  # faster CPS accumulation
    assert fids[0] > fids[1] > fids[2]


def test_validate_and_fault_injection(capsys):
    assert run(["validate"]) == 0
    out = capsys.readouterr().out
    assert "dense-45 vs restricted-18 frobenius" in out and "FAIL" not in out
    assert run(["validate", "--fault-inject", "hamiltonian"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "hermitian" in out


def test_trajectory_output(tmp_path):
    cfg = small_cfg(tmp_path, n=11, extra="\n[output]\ntrajectory = yes\ntrajectory_indices = 0,1\n")
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, rows = csvio.read_rows(tmp_path / "trajectory.csv")
    assert header[:3] == ["t", "re(rho_0_0)", "im(rho_0_0)"] and len(header) == 9
    assert rows[0][1] == pytest.approx(0.25)


def test_console_script_and_logging(tmp_path):
    cfg = small_cfg(tmp_path, n=5)
    env = {"MGATE_LOG": "info", "PATH": "/usr/bin:/bin:/usr/local/bin"}
    proc = subprocess.run([sys.executable, "-m", "mgate", "simulate", "--config", cfg, "--out", str(tmp_path)],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "INFO" in proc.stderr
