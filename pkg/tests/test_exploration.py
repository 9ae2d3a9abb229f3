"""Regression pins for the bundled alternative rate reading (not acceptance).

``total_linewidth.cfg`` treats gamma as the total width of levels 2 and 4,
split equally over the three channels out of each. Values below were
computed once with the matrix-exponential route and frozen.
"""

import math

import pytest

from mgate import dynamics, metrics
from mgate.config import load_config


def test_total_linewidth_reading():
    cfg = load_config("total_linewidth.cfg")
    series = metrics.compute_metrics(cfg.params, cfg.times, cfg.solver, cfg.mc)
    op = metrics.operating_point(series, 0.2 / cfg.gamma_ref, 0.6 / cfg.gamma_ref)
    assert op is not None
    assert op.t * cfg.gamma_ref == pytest.approx(0.394, abs=0.01)
    assert op.fid_det == pytest.approx(0.939, abs=0.003)
    assert op.fid_cond == pytest.approx(0.987, abs=0.003)
    assert op.p_success == pytest.approx(0.880, abs=0.003)


def test_total_linewidth_frozen_point():
    cfg = load_config("total_linewidth.cfg")
    t = 0.394 / cfg.gamma_ref
    expm = dynamics.SolverOptions(method="matrix-exponential")
    (_, m) = metrics.compute_metrics(cfg.params, [0.0, t], expm)
    # two-point grid: only the wrapped CPS is meaningful
    assert abs(abs(m.cps) - math.pi) < 0.02 * math.pi
    assert m.fid_det == pytest.approx(0.93927, abs=5e-5)
    assert m.fid_cond == pytest.approx(0.98734, abs=5e-5)
    assert m.p_success == pytest.approx(0.87996, abs=5e-5)
