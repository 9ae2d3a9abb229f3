"""Gate figures of merit: phases, CPS, fidelities, success probability.

Phase convention: ``phi_ij = arg <i_p j_t| rho_f |0_p 0_t>``, so a pure phase
gate ``|ij> -> exp(i phi_ij) |ij>`` acting on real positive amplitudes is
read back exactly. ``phi_00`` is identically zero because the vacuum
component never evolves.
"""

from __future__ import annotations

import dataclasses
import math
from functools import lru_cache

import numpy as np
import scipy.special

from . import dynamics, model
from .errors import IntegrationError, SingularParametersError, UndefinedPhaseError
from .sampling import DEFAULT_SEED, haar_amplitudes

D = 4  # two-qubit field dimension


@dataclasses.dataclass(frozen=True)
class PhaseSet:
    phi01: float
    phi10: float
    phi11: float
    unwrapped: bool = False

    def as_array(self) -> np.ndarray:
        """Phases of ``|00>, |01>, |10>, |11>`` (first entry 0)."""
        return np.array([0.0, self.phi01, self.phi10, self.phi11])

    def swapped(self) -> "PhaseSet":
        return PhaseSet(self.phi10, self.phi01, self.phi11, self.unwrapped)


@dataclasses.dataclass(frozen=True)
class MCOptions:
    """Averaging options for the conditional fidelity.

    ``method="quadrature"`` integrates the Haar average exactly over the
    phases and by Gauss-Jacobi quadrature over the simplex of weights;
    ``method="monte-carlo"`` draws ``n_samples`` Haar inputs from ``seed``.
    """

    n_samples: int = 2000
    seed: int = DEFAULT_SEED
    method: str = "quadrature"
    quadrature_order: int = 12

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.method not in ("quadrature", "monte-carlo"):
            raise ValueError(f"unknown averaging method {self.method!r}")


@dataclasses.dataclass(frozen=True)
class GateMetrics:
    t: float
    phases: PhaseSet
    phases_unwrapped: PhaseSet
    cps: float
    cps_unwrapped: float
    fid_det: float
    fid_cond: float
    p_success: float
    leakage: float
    populations: tuple
    p_components: tuple = (1.0, 1.0, 1.0, 1.0)
    conditional_phases: PhaseSet | None = None


CSV_HEADER = ("t", "phi01", "phi10", "phi11", "cps", "cps_unwrapped", "fid_det", "fid_cond",
              "p_success", "leakage", "pop1", "pop2", "pop3", "pop4", "pop5")


def metrics_row(m: GateMetrics) -> tuple:
    return (m.t, m.phases.phi01, m.phases.phi10, m.phases.phi11, m.cps, m.cps_unwrapped,
            m.fid_det, m.fid_cond, m.p_success, m.leakage, *m.populations)


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    return np.angle(np.exp(1j * np.asarray(x, dtype=float)))


def reduced_field_state(rho):
    """Trace out the atom and keep the two-qubit field block.

    Returns ``(block, leakage)`` where ``leakage`` is the field population
    outside span{|00>, |01>, |10>, |11>}.
    """
    rho = np.asarray(rho)
    if rho.shape != (18, 18):
        raise ValueError(f"expected an 18x18 density matrix, got {rho.shape}")
    block = dynamics._qubit_block(rho)
    leakage = np.trace(rho).real - np.trace(block).real
    return block, max(0.0, float(leakage))


def atomic_populations(rho) -> tuple:
    """Population of atomic levels 1..5."""
    diag = np.real(np.diagonal(rho))
    pops = [0.0] * 5
    for i, s in enumerate(model.enumerate_basis()):
        pops[s.r - 1] += diag[i]
    return tuple(float(p) for p in pops)


def extract_phases(block, min_modulus: float = 1e-12) -> PhaseSet:
    """``phi_ij = arg <ij| block |00>`` for the reference input."""
    block = np.asarray(block)
    col = block[1:, 0]
    if np.any(np.abs(col) < min_modulus):
        raise UndefinedPhaseError(
            f"coherence modulus {np.abs(col).min():.3e} below {min_modulus:g}; phase undefined"
        )
    phi01, phi10, phi11 = (float(x) for x in np.angle(col))
    return PhaseSet(phi01, phi10, phi11)


def conditional_phase_shift(phases: PhaseSet) -> float:
    """``phi11 + phi00 - phi10 - phi01`` with ``phi00 = 0``.

    Raw phases give a result wrapped to (-pi, pi]; unwrapped phases give the
    continuous value.
    """
    cps = phases.phi11 - phases.phi10 - phases.phi01
    return cps if phases.unwrapped else float(wrap_phase(cps))


def unwrap_phase_series(series):
    """Remove 2*pi jumps so consecutive samples differ by less than pi.

    Accepts a sequence of floats (returns an array) or of PhaseSet (returns
    a list of PhaseSet flagged ``unwrapped``).
    """
    series = list(series)
    if series and isinstance(series[0], PhaseSet):
        arr = np.unwrap(np.array([[p.phi01, p.phi10, p.phi11] for p in series]), axis=0)
        return [PhaseSet(*map(float, row), unwrapped=True) for row in arr]
    return np.unwrap(np.asarray(series, dtype=float))


def _overlap_matrix(op, phases) -> np.ndarray:
    """``Q`` with Haar-phase-averaged overlap ``E_theta[...] = w^T Q w``.

    ``op(a, b)`` returns the (possibly unnormalised) output for ``|a><b|``;
    ``w_a = |c_a|^2``.
    """
    phi = phases.as_array() if isinstance(phases, PhaseSet) else np.asarray(phases)
    Q = np.zeros((D, D))
    for c in range(D):
        out = op(c, c)
        for a in range(D):
            Q[a, c] += out[a, a].real
    for a in range(D):
        for c in range(D):
            if a != c:
                Q[a, c] += (np.exp(1j * (phi[c] - phi[a])) * op(a, c)[a, c]).real
    return 0.5 * (Q + Q.T)


def average_fidelity(pm: dynamics.ProcessMap, phases: PhaseSet) -> float:
    """Haar-averaged fidelity with the ideal phase gate, in closed form.

    Uses ``E[c_a c_b* c_c c_d*] = (d_ab d_cd + d_ad d_cb) / (d (d + 1))``::

        F^2 = [sum_a <a|L(I)|a> + sum_ab e^{i(phi_b - phi_a)} <a|L(|a><b|)|b>] / 20
    """
    Q = _overlap_matrix(pm.operator, phases)
    second_moment = (np.eye(D) + np.ones((D, D))) / (D * (D + 1))
    mean = float(np.sum(Q * second_moment))
    return math.sqrt(max(mean, 0.0))


@lru_cache(maxsize=8)
def simplex_rule(order: int = 12):
    """Nodes and weights for E over Dirichlet(1, 1, 1, 1) on the 3-simplex.

    Stick-breaking with ``u1 ~ Beta(1, 3)``, ``u2 ~ Beta(1, 2)``,
    ``u3 ~ Beta(1, 1)``, each integrated by shifted Gauss-Jacobi.
    """
    rules = []
    for p1 in (3, 2, 1):
        x, w = scipy.special.roots_sh_jacobi(order, p1, 1)
        rules.append((x, w / w.sum()))
    u1, u2, u3 = np.meshgrid(rules[0][0], rules[1][0], rules[2][0], indexing="ij")
    w1, w2, w3 = np.meshgrid(rules[0][1], rules[1][1], rules[2][1], indexing="ij")
    u1, u2, u3 = u1.ravel(), u2.ravel(), u3.ravel()
    W = np.stack([u1, (1 - u1) * u2, (1 - u1) * (1 - u2) * u3, (1 - u1) * (1 - u2) * (1 - u3)], axis=1)
    return W, (w1 * w2 * w3).ravel()


def _nojump_block(M, a, b):
    """Qubit block of ``Tr_atom(M|a><b|M^dag)``."""
    return dynamics._qubit_block(np.outer(M[:, a], M[:, b].conj()))


def _conditional_figures(M, mc: MCOptions):
    """Conditional fidelity and success data from no-jump columns ``M``.

    ``M[:, a]`` is the no-jump evolved state of field basis input ``a``.
    Returns ``(fid_cond, p_success, p_components, conditional PhaseSet)``.
    """
    p = np.real(np.sum(np.abs(M) ** 2, axis=0))
    ref = M @ np.asarray(model.REFERENCE_AMPLITUDES, dtype=complex)
    p_success = float(np.vdot(ref, ref).real)
    phases = extract_phases(dynamics._qubit_block(np.outer(ref, ref.conj())))
    if mc.method == "quadrature":
        cache = {}

        def op(a, b):
            if (a, b) not in cache:
                cache[(a, b)] = _nojump_block(M, a, b)
            return cache[(a, b)]

        Q = _overlap_matrix(op, phases)
        W, weights = simplex_rule(mc.quadrature_order)
        vals = np.einsum("na,ab,nb->n", W, Q, W) / (W @ p)
        mean = float(weights @ vals)
    else:
        mean, _ = _conditional_mc(M, phases, mc.n_samples, mc.seed)
    return math.sqrt(max(mean, 0.0)), p_success, tuple(float(x) for x in p), phases


def _conditional_mc(M, phases, n, seed):
    C = haar_amplitudes(n, seed)
    psi = M @ C.T
    blocks = np.einsum("abij,is,js->sab", dynamics._R, psi, psi.conj())
    norms = np.real(np.einsum("saa->s", blocks))
    ideal = C * np.exp(1j * phases.as_array())
    overlaps = np.real(np.einsum("sa,sab,sb->s", ideal.conj(), blocks, ideal)) / norms
    return float(overlaps.mean()), float(overlaps.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def _field_columns():
    basis = model.enumerate_basis()
    psi0 = np.zeros((len(basis), D), dtype=complex)
    psi0[basis.field_indices(), range(D)] = 1.0
    return psi0


def conditional_fidelity(params, t, opts=dynamics.DEFAULT_OPTIONS, n_samples=2000,
                         seed=DEFAULT_SEED, method="quadrature"):
    """Fidelity conditioned on no decay event, and the success probability.

    The ideal phases come from the normalised no-jump field state of the
    reference input at the same time. Returns ``(fid_cond, p_success)`` with
    ``p_success`` the no-jump probability of the reference input.
    """
    mc = MCOptions(n_samples=n_samples, seed=seed, method=method)
    grid = [0.0, t] if t > 0 else [0.0]
    M = dynamics.evolve_nojump(params, _field_columns(), grid, opts)[-1]
    fid, p_success, _, _ = _conditional_figures(M, mc)
    return fid, p_success


def perturbative_cps(params, t) -> float:
    """Fourth-order closed form for the CPS in the dispersive limit.

    ::

        phi = G_p^2 G_t^2 t / (D3 D1)
              * [eps34 (eps12^2 + omega1^2) / D1 + eps12 (eps34^2 + omega4^2) / D3]

    with ``D1 = eps12 delta1 - omega1^2`` and ``D3 = eps34 delta3 - omega4^2``.
    This expression counts phases with the opposite sign to
    :func:`extract_phases`: a numerical run gives ``-perturbative_cps``.
    """
    e12, e34 = params.eps12, params.eps34
    D1 = e12 * params.delta1 - params.omega1 ** 2
    D3 = e34 * params.delta3 - params.omega4 ** 2
    for name, den, scale in (("eps12*delta1 - omega1^2", D1, abs(e12 * params.delta1) + params.omega1 ** 2),
                             ("eps34*delta3 - omega4^2", D3, abs(e34 * params.delta3) + params.omega4 ** 2)):
        if den == 0 or abs(den) <= 1e-14 * scale:
            raise SingularParametersError(f"{name} vanishes (two-photon resonance pole)")
    prefactor = params.G_p ** 2 * params.G_t ** 2 * t / (D3 * D1)
    return prefactor * (e34 * (e12 ** 2 + params.omega1 ** 2) / D1
                        + e12 * (e34 ** 2 + params.omega4 ** 2) / D3)


def _series_from(times, maps, ref_states, nojump_cols, mc):
    raw = []
    blocks = []
    for rho in ref_states:
        block, leak = reduced_field_state(rho)
        blocks.append((block, leak))
        raw.append(extract_phases(block))
    unwrapped = unwrap_phase_series(raw)
    out = []
    for i, t in enumerate(times):
        fid_cond, p_success, p_comp, phases_c = _conditional_figures(nojump_cols[i], mc)
        out.append(GateMetrics(
            t=float(t),
            phases=raw[i],
            phases_unwrapped=unwrapped[i],
            cps=conditional_phase_shift(raw[i]),
            cps_unwrapped=conditional_phase_shift(unwrapped[i]),
            fid_det=average_fidelity(maps[i], raw[i]),
            fid_cond=fid_cond,
            p_success=p_success,
            leakage=blocks[i][1],
            populations=atomic_populations(ref_states[i]),
            p_components=p_comp,
            conditional_phases=phases_c,
        ))
    return out


def compute_metrics(params, t_grid, opts=dynamics.DEFAULT_OPTIONS, mc: MCOptions = MCOptions()):
    """One :class:`GateMetrics` per sample of ``t_grid`` (µs, starting at 0).

    Raises IntegrationError with ``partial`` set to the metrics of the
    samples completed before the failure.
    """
    t_grid = dynamics._check_grid(t_grid)
    if t_grid[0] != 0:
        raise ValueError("t_grid must start at 0 so phases can be unwrapped")
    psi_ref = model.reference_state()
    rho_ref = np.outer(psi_ref, psi_ref.conj())
    try:
        maps, extra = dynamics.process_map_series(params, t_grid, opts, extra=rho_ref[None])
    except IntegrationError as exc:
        partial = []
        if exc.partial:
            maps, extra = exc.partial
            times = t_grid[: len(maps)]
            if len(times):
                cols = dynamics.evolve_nojump(params, _field_columns(), times, opts)
                partial = _series_from(times, maps, extra[:, 0], cols, mc)
        raise IntegrationError(str(exc), exc.last_time, partial) from exc
    cols = dynamics.evolve_nojump(params, _field_columns(), t_grid, opts)
    return _series_from(t_grid, maps, extra[:, 0], cols, mc)


def cps_pi_crossings(series):
    """Samples at which ``|cps_unwrapped|`` passes an odd multiple of pi.

    Returns a list of ``(index, t_cross)``: ``index`` is the first sample at
    or beyond the crossing, ``t_cross`` is linearly interpolated.
    """
    c = np.abs(np.array([m.cps_unwrapped for m in series]))
    t = np.array([m.t for m in series])
    band = np.floor((c - np.pi) / (2 * np.pi))
    out = []
    for k in range(1, len(c)):
        if band[k] != band[k - 1]:
            level = np.pi + 2 * np.pi * max(band[k], band[k - 1])
            frac = (level - c[k - 1]) / (c[k] - c[k - 1])
            out.append((k, float(t[k - 1] + frac * (t[k] - t[k - 1]))))
    return out


def operating_point(series, t_min=0.0, t_max=np.inf, cps_tol=0.02 * np.pi):
    """Best-fidelity sample whose CPS is within ``cps_tol`` of pi (mod 2 pi).

    Returns the :class:`GateMetrics` maximising ``fid_det`` among samples in
    ``[t_min, t_max]``, or None when the CPS never comes that close to pi.
    """
    best = None
    for m in series:
        if not (t_min <= m.t <= t_max):
            continue
        if abs(wrap_phase(abs(m.cps_unwrapped) - np.pi)) <= cps_tol:
            if best is None or m.fid_det > best.fid_det:
                best = m
    return best
