import numpy as np
import pytest

from mgate import dynamics, metrics, model, oracle

GAMMA = model.RB_D2_GAMMA
EXPM = dynamics.SolverOptions(method="matrix-exponential")


def random_rho(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(18, 2)) + 1j * rng.normal(size=(18, 2))
    rho = z @ z.conj().T
    return rho / np.trace(rho)


def test_dense_space():
    space = oracle.DenseSpace()
    assert space.dim == 45 and len(space.states) == 45
    assert len(set(space.embedding)) == 18
    for i, s in enumerate(model.enumerate_basis()):
        assert space.states[space.embedding[i]] == tuple(s)


PARAM_SETS = oracle.validation_parameter_sets()


@pytest.mark.parametrize("label, params", PARAM_SETS, ids=[l for l, _ in PARAM_SETS])
@pytest.mark.parametrize("method", ["matrix-exponential", "adaptive-rk"])
def test_dense_vs_restricted(label, params, method):
    opts = dynamics.SolverOptions(method=method)
    rho0 = random_rho(11)
    t = 0.6 / max(params.gamma.values())
    dense = oracle.dense_propagate(params, rho0, t, opts)
    space = oracle.DenseSpace()
    assert abs(space.outside_population(dense)) < 1e-10
    assert np.max(np.abs(dense)[np.ix_(~np.isin(np.arange(45), space.embedding), np.arange(45))]) < 1e-10
    restricted = dynamics.propagate_master(params, rho0, t, opts)
    assert np.linalg.norm(space.restrict(dense) - restricted) <= 1e-9


def test_dense_vacuum_stationary():
    space = oracle.DenseSpace()
    rho0 = np.zeros((45, 45), dtype=complex)
    i = space.index((3, 0, 0))
    rho0[i, i] = 1
    assert np.allclose(oracle.dense_propagate(PARAM_SETS[0][1], rho0, 1.0, EXPM), rho0)


def test_closure_sizes():
    base = model.transient_gate_params()
    assert len(oracle.reachability_closure(base.replace(gamma=0.0))) == 12
    only25 = {k: 0.0 for k in base.gamma}
    only25[(5, 2)] = GAMMA
    closure = oracle.reachability_closure(base.replace(gamma=only25))
    assert len(closure) == 15
    assert {(3, 0, 2), (4, 0, 1), (5, 0, 0)} <= closure
    assert len(oracle.reachability_closure(base)) == 18


def test_mc_identity_channel():
    fid, se = oracle.mc_channel_fidelity(lambda X: X, metrics.PhaseSet(0, 0, 0), n=500)
    assert fid == pytest.approx(1, abs=1e-14) and se == pytest.approx(0, abs=1e-14)


def test_mc_matches_closed_form_published():
    p = model.transient_gate_params()
    t = 0.4 / GAMMA
    rho = dynamics.propagate_master(p, np.outer(model.reference_state(), model.reference_state()), t)
    phases = metrics.extract_phases(metrics.reduced_field_state(rho)[0])
    closed = metrics.average_fidelity(dynamics.build_process_map(p, t), phases)
    mc, se = oracle.mc_average_fidelity(p, t, phases, n=10_000)
    assert abs(closed - mc) <= 3 * se


def test_mc_requires_enough_samples():
    with pytest.raises(ValueError):
        oracle.mc_channel_fidelity(lambda X: X, metrics.PhaseSet(0, 0, 0), n=10)


def test_haar_sampler_moments_and_scheduling():
    from mgate.sampling import haar_amplitudes
    n = 10_000
    C = haar_amplitudes(n)
    assert np.allclose(np.linalg.norm(C, axis=1), 1)
    w = np.abs(C) ** 2
    assert np.all(np.abs(w.mean(axis=0) - 0.25) <= 3 * w.std(axis=0) / np.sqrt(n))
    # slicing the index range reproduces the same draws
    assert np.array_equal(haar_amplitudes(10, start=500), C[500:510])


def test_validation_report_passes():
    results = oracle.run_validation()
    report = oracle.format_report(results)
    assert all(r.passed for r in results), report
    assert "dense-45 vs restricted-18 frobenius" in report


def test_validation_detects_corrupted_hamiltonian():
    def broken(params):
        H = model.build_hamiltonian(params)
        H[0, 1] += 1e-3
        return H

    results = oracle.run_validation(PARAM_SETS[:1], hamiltonian_builder=broken, mc_samples=500)
    herm = [r for r in results if "hermitian" in r.name]
    assert herm and not any(r.passed for r in herm)
