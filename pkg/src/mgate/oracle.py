"""Brute-force reference implementations used to validate the fast engine.

Nothing here reuses the restricted-basis construction from :mod:`model`:
the dense simulator builds the Hamiltonian from tensor products of atomic
projectors and truncated bosonic operators on the full 5 x 3 x 3 space.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, NamedTuple

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from . import dynamics, metrics, model
from .sampling import DEFAULT_SEED, haar_amplitudes, sample_rng

N_LEVELS = 5
N_PHOTONS = 3  # photon numbers 0, 1, 2 per mode


class DenseSpace:
    """Full tensor-product basis atom (5) x probe (0..2) x trigger (0..2).

    States are ordered as ``kron(atom, probe, trigger)``, so
    ``(r, n_p, n_t)`` has index ``9 (r - 1) + 3 n_p + n_t``.
    """

    dim = N_LEVELS * N_PHOTONS * N_PHOTONS

    def __init__(self):
        self.states = tuple(itertools.product(range(1, 6), range(N_PHOTONS), range(N_PHOTONS)))
        basis = model.enumerate_basis()
        self.embedding = np.array([self.index(s) for s in basis])
        assert len(set(self.embedding.tolist())) == len(basis)

    @staticmethod
    def index(state) -> int:
        r, n_p, n_t = state
        return (r - 1) * N_PHOTONS ** 2 + n_p * N_PHOTONS + n_t

    def embed(self, x):
        """Lift an 18-dim vector or density matrix to the dense space."""
        x = np.asarray(x)
        idx = self.embedding
        if x.ndim == 1:
            out = np.zeros(self.dim, dtype=complex)
            out[idx] = x
        else:
            out = np.zeros((self.dim, self.dim), dtype=complex)
            out[np.ix_(idx, idx)] = x
        return out

    def restrict(self, rho):
        idx = self.embedding
        return np.asarray(rho)[np.ix_(idx, idx)]

    def outside_population(self, rho) -> float:
        """Population on dense states that are not in the embedded 18."""
        mask = np.ones(self.dim, dtype=bool)
        mask[self.embedding] = False
        return float(np.real(np.diagonal(rho))[mask].sum())


def _ket_bra(k, l, n=N_LEVELS):
    m = np.zeros((n, n))
    m[k - 1, l - 1] = 1.0
    return m


def _lowering(n=N_PHOTONS):
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def dense_hamiltonian(params) -> np.ndarray:
    """Hamiltonian on the 45-dim space built from tensor products."""
    a = _lowering()
    i_f = np.eye(N_PHOTONS)
    i_ff = np.eye(N_PHOTONS ** 2)
    atom = np.diag([params.eps12, params.delta2, 0.0, params.delta3, params.eps34]).astype(complex)
    atom += params.omega1 * (_ket_bra(1, 2) + _ket_bra(2, 1))
    atom += params.omega4 * (_ket_bra(4, 5) + _ket_bra(5, 4))
    H = np.kron(atom, i_ff)
    probe = params.G_p * np.kron(_ket_bra(2, 3), np.kron(a, i_f))
    trigger = params.G_t * np.kron(_ket_bra(4, 3), np.kron(i_f, a))
    H = H + probe + probe.conj().T + trigger + trigger.conj().T
    return H


def dense_jumps(params):
    """``[(sigma_kl kron I, rate)]`` for the six channels."""
    i_ff = np.eye(N_PHOTONS ** 2)
    out = []
    for upper, lower in model.DECAY_CHANNELS:
        out.append((np.kron(_ket_bra(lower, upper), i_ff), params.rate(upper, lower)))
    return out


def dense_liouvillian(params) -> sp.csr_matrix:
    """Sparse column-stacking Lindblad generator, ``(2025, 2025)``."""
    H = sp.csr_matrix(dense_hamiltonian(params))
    eye = sp.identity(DenseSpace.dim, format="csr")
    gen = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
    for L, rate in dense_jumps(params):
        if rate == 0:
            continue
        L = sp.csr_matrix(L)
        LdL = L.conj().T @ L
        gen = gen + rate * (sp.kron(L.conj(), L) - 0.5 * sp.kron(eye, LdL) - 0.5 * sp.kron(LdL.T, eye))
    return sp.csr_matrix(gen)


def dense_propagate(params, rho0, t, opts: dynamics.SolverOptions = dynamics.DEFAULT_OPTIONS):
    """Evolve ``rho0`` (18- or 45-dim) for time ``t`` on the dense space."""
    space = DenseSpace()
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape == (18, 18):
        rho0 = space.embed(rho0)
    if rho0.shape != (space.dim, space.dim):
        raise ValueError(f"expected an 18- or 45-dim density matrix, got {rho0.shape}")
    dynamics.check_density_matrix(rho0)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return rho0.copy()
    n = space.dim
    if opts.method == "matrix-exponential":
        vec = scipy.sparse.linalg.expm_multiply(dense_liouvillian(params) * t, rho0.reshape(-1, order="F"))
        return vec.reshape((n, n), order="F")
    H = dense_hamiltonian(params)
    jumps = [(L, rate) for L, rate in dense_jumps(params) if rate > 0]
    K = -1j * H - 0.5 * sum(rate * L.T @ L for L, rate in jumps) if jumps else -1j * H

    def fun(_t, y):
        rho = y.reshape(n, n)
        out = K @ rho + rho @ K.conj().T
        for L, rate in jumps:
            out += rate * (L @ rho @ L.T)
        return out.ravel()

    sol = scipy.integrate.solve_ivp(fun, (0.0, t), rho0.ravel(), method="DOP853",
                                    rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step)
    if not sol.success:
        raise dynamics.IntegrationError(sol.message, float(sol.t[-1]))
    return sol.y[:, -1].reshape(n, n)


def reachability_closure(params):
    """States reachable from the four gate inputs over the dense space.

    Follows nonzero Hamiltonian matrix elements and decay channels with
    nonzero rate until a fixpoint. Returns a frozenset of ``(r, n_p, n_t)``.
    """
    space = DenseSpace()
    adjacency = np.abs(dense_hamiltonian(params)) > 0
    for L, rate in dense_jumps(params):
        if rate > 0:
            adjacency |= (L != 0).T
    frontier = [space.index((3, n_p, n_t)) for n_p, n_t in model.FIELD_BASIS]
    seen = set(frontier)
    while frontier:
        i = frontier.pop()
        for j in np.flatnonzero(adjacency[i]):
            if j not in seen:
                seen.add(int(j))
                frontier.append(int(j))
    return frozenset(space.states[i] for i in seen)


def _overlaps(blocks, amps, phases):
    ideal = amps * np.exp(1j * phases.as_array())
    return np.real(np.einsum("sa,sab,sb->s", ideal.conj(), blocks, ideal))


def _fidelity_estimate(overlaps):
    n = len(overlaps)
    mean = float(np.mean(overlaps))
    se_mean = float(np.std(overlaps, ddof=1) / math.sqrt(n))
    fid = math.sqrt(max(mean, 0.0))
    se = se_mean / (2 * fid) if fid > 0 else se_mean
    return fid, se


def mc_average_fidelity(params, t, phases, n: int = 10_000, seed: int = DEFAULT_SEED,
                        opts: dynamics.SolverOptions | None = None):
    """Monte-Carlo Haar average of the gate fidelity, ``(F, standard error)``.

    Each sample is a full master-equation evolution of its own input state,
    done here by one matrix exponential of the Liouvillian applied to the
    whole batch.
    """
    if n < 100:
        raise ValueError("n must be >= 100")
    C = haar_amplitudes(n, seed)
    basis = model.enumerate_basis()
    psi = np.zeros((n, len(basis)), dtype=complex)
    psi[:, basis.field_indices()] = C
    rhos = np.einsum("si,sj->sij", psi, psi.conj())
    if opts is not None and opts.method == "adaptive-rk":
        out = dynamics.evolve_master(params, rhos, [t], opts)[-1]
    else:
        P = scipy.linalg.expm(dynamics.liouvillian(params) * t)
        vecs = rhos.transpose(0, 2, 1).reshape(n, -1)
        out = (vecs @ P.T).reshape(n, len(basis), len(basis)).transpose(0, 2, 1)
    blocks = np.einsum("abij,sij->sab", dynamics.field_reduction_tensor(), out)
    return _fidelity_estimate(_overlaps(blocks, C, phases))


def mc_channel_fidelity(channel: Callable, phases, n: int = 10_000, seed: int = DEFAULT_SEED):
    """Monte-Carlo Haar fidelity of a channel given as ``4x4 -> 4x4`` callable."""
    if n < 100:
        raise ValueError("n must be >= 100")
    C = haar_amplitudes(n, seed)
    blocks = np.array([channel(np.outer(c, c.conj())) for c in C])
    return _fidelity_estimate(_overlaps(blocks, C, phases))


class CheckResult(NamedTuple):
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


def validation_parameter_sets():
    """Three parameter sets in γ units: symmetric, asymmetric γ, detuned."""
    base = model.transient_gate_params(1.0)
    asym = base.replace(gamma={(1, 2): 0.3, (3, 2): 1.1, (5, 2): 0.6, (1, 4): 0.9, (3, 4): 0.2, (5, 4): 0.45})
    detuned = model.SchemeParams(delta1=-8.0, delta2=-8.3, delta3=12.0, delta4=11.95, omega1=3.0,
                                 omega4=5.5, G_p=14.0, G_t=18.0, gamma=0.7)
    return [("published", base), ("asymmetric-gamma", asym), ("detuned", detuned)]


def _random_density(seed, dim=18):
    rng = sample_rng(seed, 0)
    z = rng.standard_normal((dim, 2)) @ np.array([1, 1j])
    z /= np.linalg.norm(z)
    w = rng.standard_normal((dim, 2)) @ np.array([1, 1j])
    w /= np.linalg.norm(w)
    return 0.7 * np.outer(z, z.conj()) + 0.3 * np.outer(w, w.conj())


def run_validation(params_list=None, hamiltonian_builder=None, t=0.4, mc_samples=10_000):
    """Run every oracle equivalence and invariant check.

    ``params_list`` is a list of ``(label, SchemeParams)``; times are
    ``t`` divided by the largest decay rate of each set (or ``t`` itself when
    all rates vanish). ``hamiltonian_builder`` replaces
    :func:`model.build_hamiltonian` in the Hermiticity check; it exists so
    the report can be exercised with a deliberately broken Hamiltonian.
    """
    params_list = params_list or validation_parameter_sets()
    builder = hamiltonian_builder or model.build_hamiltonian
    expm = dynamics.SolverOptions(method="matrix-exponential")
    rk = dynamics.DEFAULT_OPTIONS
    space = DenseSpace()
    results = []

    def add(name, measured, tol, detail="", le=True):
        ok = bool(measured <= tol) if le else bool(measured >= tol)
        results.append(CheckResult(name, ok, float(measured), float(tol), detail))

    for k, (label, params) in enumerate(params_list):
        scale = max(params.gamma.values()) or 1.0
        tt = t / scale
        H = builder(params)
        add(f"[{label}] hamiltonian hermitian", np.linalg.norm(H - H.conj().T), 1e-12)
        rho0 = _random_density(1000 + k)
        restricted = dynamics.propagate_master(params, rho0, tt, expm)
        dense = dense_propagate(params, rho0, tt, expm)
        add(f"[{label}] dense-45 vs restricted-18 frobenius",
            np.linalg.norm(space.restrict(dense) - restricted), 1e-9)
        add(f"[{label}] dense population outside 18 states", abs(space.outside_population(dense)), 1e-10)
        rk_rho = dynamics.propagate_master(params, rho0, tt, rk)
        add(f"[{label}] adaptive-rk vs matrix-exponential", np.linalg.norm(rk_rho - restricted), 1e-7)
        traj = dynamics.evolve_master(params, rho0[None], np.linspace(0, 3 * tt, 31), rk)[:, 0]
        add(f"[{label}] trace preservation", max(abs(np.trace(r).real - 1) for r in traj), 1e-8)
        herm = max(np.linalg.norm(r - r.conj().T) for r in traj)
        add(f"[{label}] hermiticity along trajectory", herm, 1e-10)
        eig = min(np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() for r in traj)
        add(f"[{label}] positivity along trajectory", -eig, 1e-9)
        closure = reachability_closure(params)
        expected = set(model.enumerate_basis()) if all(v > 0 for v in params.gamma.values()) else None
        if expected is not None:
            add(f"[{label}] closure equals 18-state basis", len(closure.symmetric_difference(expected)), 0)

    base = params_list[0][1]
    unitary = base.replace(gamma=0.0)
    traj = dynamics.evolve_master(unitary, _random_density(7)[None], np.linspace(0, 2.0, 21), rk)[:, 0]
    p0 = np.trace(traj[0] @ traj[0]).real
    add("purity conserved at gamma=0", max(abs(np.trace(r @ r).real - p0) for r in traj), 1e-8)

    sizes = {}
    for tag, g in (("none", 0.0), ("gamma25 only", {**{k: 0.0 for k in base.gamma}, (5, 2): 1.0}), ("all", 1.0)):
        sizes[tag] = len(reachability_closure(base.replace(gamma=g)))
    add("closure size, no decay (12)", abs(sizes["none"] - 12), 0)
    add("closure size, gamma25>0 gamma41=0 (15)", abs(sizes["gamma25 only"] - 15), 0)
    add("closure size, all channels (18)", abs(sizes["all"] - 18), 0)

    scale = max(base.gamma.values()) or 1.0
    tt = t / scale
    pm = dynamics.build_process_map(base, tt, rk)
    rho_f = dynamics.propagate_master(base, np.outer(model.reference_state(), model.reference_state().conj()), tt, rk)
    phases = metrics.extract_phases(metrics.reduced_field_state(rho_f)[0])
    closed = metrics.average_fidelity(pm, phases)
    mc, se = mc_average_fidelity(base, tt, phases, n=mc_samples)
    add("haar closed form vs monte-carlo (sigma units)", abs(closed - mc) / se, 3.0,
        f"closed={closed:.6f} mc={mc:.6f}+-{se:.1e}")

    C = haar_amplitudes(mc_samples)
    w = np.abs(C) ** 2
    z = np.abs(w.mean(axis=0) - 0.25) / (w.std(axis=0, ddof=1) / math.sqrt(mc_samples))
    add("haar sampler E|c_a|^2 = 1/4 (sigma units)", z.max(), 3.0)
    a, b = np.triu_indices(4, 1)
    off = C[:, a] * C[:, b].conj()
    off = np.concatenate([off.real, off.imag], axis=1)
    z = np.abs(off.mean(axis=0)) / (off.std(axis=0, ddof=1) / math.sqrt(mc_samples))
    add("haar sampler E[c_a c_b*] = 0 (sigma units)", z.max(), 3.0)

    grid = np.linspace(0, tt, 11)
    direct = metrics.compute_metrics(base, grid, rk)
    mirrored = metrics.compute_metrics(model.swap_probe_trigger(base), grid, rk)
    dev = 0.0
    for a, b in zip(direct, mirrored):
        dev = max(dev, abs(a.phases.phi01 - b.phases.phi10), abs(a.phases.phi10 - b.phases.phi01),
                  abs(a.phases.phi11 - b.phases.phi11), abs(a.fid_det - b.fid_det), abs(a.p_success - b.p_success))
    add("probe<->trigger symmetry", dev, 1e-7)
    return results


def format_report(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  measured     tolerance"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{r.name:<{width}}  {status:<6}  {r.measured:<11.3e}  {r.tolerance:.1e}"
        if r.detail:
            line += f"  ({r.detail})"
        lines.append(line)
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
