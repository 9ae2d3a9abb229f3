"""Time evolution: Lindblad master equation and no-jump evolution.

Density matrices are plain complex ``(18, 18)`` arrays. Vectorisation, where
needed, is column stacking: ``vec(A X B) = (B.T kron A) vec(X)``, i.e.
``X.reshape(-1, order="F")``.

Two integrators are available through :class:`SolverOptions`:
``"adaptive-rk"`` (scipy's DOP853, the default) and ``"matrix-exponential"``
(scaling-and-squaring exponential of the 324x324 Liouvillian). The two are
independent routes and are checked against each other in the test suite.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse

from . import model
from .errors import IntegrationError

log = logging.getLogger(__name__)

METHODS = ("adaptive-rk", "matrix-exponential")


@dataclasses.dataclass(frozen=True)
class SolverOptions:
    method: str = "adaptive-rk"
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = np.inf

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


DEFAULT_OPTIONS = SolverOptions()


def check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-9, pos_tol=1e-9):
    """Raise ValueError unless ``rho`` is Hermitian, PSD, with trace <= 1."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.linalg.norm(rho - rho.conj().T)
    if herm > herm_tol:
        raise ValueError(f"not Hermitian (Frobenius defect {herm:.3e})")
    tr = np.trace(rho).real
    if not (-trace_tol <= tr <= 1 + trace_tol):
        raise ValueError(f"trace {tr!r} outside [0, 1]")
    eig_min = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if eig_min < -pos_tol:
        raise ValueError(f"negative eigenvalue {eig_min:.3e}")
    return rho


def effective_hamiltonian(params) -> np.ndarray:
    """``H - (i/2) sum_c gamma_c L_c^dag L_c``."""
    H = model.build_hamiltonian(params)
    for L, rate in model.build_jump_operators(params):
        H = H - 0.5j * rate * (L.T.conj() @ L)
    return H


def liouvillian(params) -> np.ndarray:
    """Lindblad generator as a ``(324, 324)`` matrix acting on ``vec(rho)``."""
    H = model.build_hamiltonian(params)
    n = H.shape[0]
    eye = np.eye(n)
    L_sup = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for L, rate in model.build_jump_operators(params):
        if rate == 0:
            continue
        LdL = L.conj().T @ L
        L_sup += rate * (np.kron(L.conj(), L) - 0.5 * np.kron(eye, LdL) - 0.5 * np.kron(LdL.T, eye))
    return L_sup


class _MasterRHS:
    """``d rho / dt`` for a stack of density matrices, shape ``(k, n, n)``."""

    def __init__(self, params):
        self.K = -1j * effective_hamiltonian(params)
        self.Kd = self.K.conj().T
        n = self.K.shape[0]
        # sum_c rate_c L_c rho L_c^dag on row-major vec(rho), stored sparse
        jump = scipy.sparse.csr_matrix((n * n, n * n), dtype=complex)
        for L, rate in model.build_jump_operators(params):
            if rate > 0:
                jump = jump + rate * scipy.sparse.kron(L, L.conj(), format="csr")
        self.jump = jump.tocsr()

    def __call__(self, rho):
        out = self.K @ rho + rho @ self.Kd
        if self.jump.nnz:
            flat = rho.reshape(-1, rho.shape[-1] ** 2)
            out += (self.jump @ flat.T).T.reshape(rho.shape)
        return out


def _check_grid(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("time grid must be a non-empty 1-d sequence")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be non-negative and strictly increasing")
    return times


def _rk_solve(rhs, y0, times, opts, shape):
    """Integrate ``dy/dt = rhs(y)`` (y of ``shape``) and sample at ``times``."""
    out = np.empty((len(times),) + shape, dtype=complex)
    start = 0
    if times[0] == 0:
        out[0] = y0
        start = 1
    if start == len(times):
        return out

    def fun(_t, y):
        return rhs(y.reshape(shape)).ravel()

    sol = scipy.integrate.solve_ivp(
        fun, (0.0, times[-1]), np.asarray(y0, dtype=complex).ravel(), method="DOP853",
        t_eval=times[start:], rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step,
    )
    done = sol.y.shape[1] if sol.y.size else 0
    for k in range(done):
        out[start + k] = sol.y[:, k].reshape(shape)
    if sol.status != 0 or done != len(times) - start:
        last = sol.t[-1] if len(sol.t) else (times[0] if start else 0.0)
        raise IntegrationError(f"integration failed: {sol.message}", last_time=last,
                               partial=(times[: start + done], out[: start + done]))
    return out


def _expm_solve(generator, y0, times):
    """Sample ``exp(generator t) y0`` on ``times``; ``y0`` is ``(n, k)``."""
    out = np.empty((len(times),) + y0.shape, dtype=complex)
    y = np.asarray(y0, dtype=complex)
    t_prev = 0.0
    step, step_dt = None, None
    for i, t in enumerate(times):
        dt = t - t_prev
        if dt > 0:
            # uniform grids reuse one propagator
            if step is None or not np.isclose(dt, step_dt, rtol=1e-13, atol=0):
                step = scipy.linalg.expm(generator * dt)
                step_dt = dt
            y = step @ y
        out[i] = y
        t_prev = t
    if not np.all(np.isfinite(out)):
        raise IntegrationError("matrix exponential produced non-finite values", last_time=0.0)
    return out


def evolve_master(params, rhos, times, opts: SolverOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Evolve a stack of operators under the master equation.

    Args:
        params: SchemeParams.
        rhos: ``(n, n)`` or ``(k, n, n)`` initial operators. Any operator is
            accepted; the map is linear.
        times: strictly increasing sample times (µs), starting at or after 0.

    Returns:
        Array ``(len(times), k, n, n)`` (or ``(len(times), n, n)`` for a
        single input).
    """
    times = _check_grid(times)
    rhos = np.asarray(rhos, dtype=complex)
    single = rhos.ndim == 2
    stack = rhos[None] if single else rhos
    k, n, _ = stack.shape
    if opts.method == "adaptive-rk":
        out = _rk_solve(_MasterRHS(params), stack, times, opts, stack.shape)
    else:
        vecs = stack.transpose(2, 1, 0).reshape(n * n, k)  # column-stacked vec per input
        res = _expm_solve(liouvillian(params), vecs, times)
        out = res.reshape(len(times), n, n, k).transpose(0, 3, 2, 1)
    return out[:, 0] if single else out


def evolve_nojump(params, psis, times, opts: SolverOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Evolve state vectors under the non-Hermitian effective Hamiltonian.

    ``psis`` is ``(n,)`` or ``(n, k)``; returns ``(len(times), n[, k])``.
    """
    times = _check_grid(times)
    psis = np.asarray(psis, dtype=complex)
    single = psis.ndim == 1
    cols = psis[:, None] if single else psis
    A = -1j * effective_hamiltonian(params)
    if opts.method == "adaptive-rk":
        out = _rk_solve(lambda y: A @ y, cols, times, opts, cols.shape)
    else:
        out = _expm_solve(A, cols, times)
    return out[:, :, 0] if single else out


def propagate_master(params, rho0, t, opts: SolverOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Density matrix at time ``t`` (µs) starting from ``rho0``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    check_density_matrix(rho0)
    return evolve_master(params, rho0, [0.0, t] if t > 0 else [0.0], opts)[-1]


def propagate_nojump(params, psi0, t, opts: SolverOptions = DEFAULT_OPTIONS):
    """No-jump evolution; returns ``(unnormalised psi(t), norm^2)``.

    The squared norm is the probability that no decay event occurred.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0).real - 1) > 1e-10:
        raise ValueError("psi0 must be normalised")
    psi = evolve_nojump(params, psi0, [0.0, t] if t > 0 else [0.0], opts)[-1]
    return psi, float(np.vdot(psi, psi).real)


@dataclasses.dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    mode: str = "master"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times[0] != 0 or np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must start at 0 and strictly increase")
        if len(self.states) != len(times):
            raise ValueError("one state per time sample required")

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.states))


def sample_trajectory(params, state0, t_grid, opts: SolverOptions = DEFAULT_OPTIONS,
                      mode: str = "master") -> Trajectory:
    """States on ``t_grid`` from a single integration run.

    ``mode="master"`` takes a density matrix, ``mode="nojump"`` a state vector.
    """
    t_grid = _check_grid(t_grid)
    if t_grid[0] != 0:
        raise ValueError("t_grid must start at 0")
    if mode == "master":
        check_density_matrix(state0)
        states = evolve_master(params, state0, t_grid, opts)
    elif mode == "nojump":
        states = evolve_nojump(params, state0, t_grid, opts)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return Trajectory(t_grid, states, mode)


# -- process maps -------------------------------------------------------------

def field_reduction_tensor() -> np.ndarray:
    """``R[a, b, i, j]`` such that ``(Tr_atom rho)_{ab} = sum_ij R[a,b,i,j] rho_ij``
    restricted to the two-qubit field block."""
    basis = model.enumerate_basis()
    R = np.zeros((4, 4, len(basis), len(basis)))
    for a, (pa, ta) in enumerate(model.FIELD_BASIS):
        for b, (pb, tb) in enumerate(model.FIELD_BASIS):
            for r in range(1, 6):
                if (r, pa, ta) in basis and (r, pb, tb) in basis:
                    R[a, b, basis.index((r, pa, ta)), basis.index((r, pb, tb))] = 1.0
    return R


_R = field_reduction_tensor()


def _qubit_block(rho):
    return np.einsum("abij,...ij->...ab", _R, rho)


@dataclasses.dataclass(frozen=True)
class ProcessMap:
    """Linear map on two-qubit field operators at time ``t``.

    ``matrix[4 * c + d, 4 * a + b]`` is the ``(c, d)`` element of
    ``Lambda(|a><b|)`` in the field basis ``|00>, |01>, |10>, |11>``.
    Outputs are restricted to the qubit block, so trace lost to two-photon
    field states shows up as a trace deficit.
    """

    matrix: np.ndarray
    t: float = 0.0

    def operator(self, a: int, b: int) -> np.ndarray:
        return self.matrix[:, 4 * a + b].reshape(4, 4)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        return (self.matrix @ X.reshape(16)).reshape(4, 4)

    @classmethod
    def from_channel(cls, channel, t=0.0) -> "ProcessMap":
        """Tabulate any linear map on 4x4 matrices."""
        cols = []
        for a in range(4):
            for b in range(4):
                X = np.zeros((4, 4), dtype=complex)
                X[a, b] = 1
                cols.append(np.asarray(channel(X), dtype=complex).reshape(16))
        return cls(np.array(cols).T, t)


def _polarization_inputs():
    """Hermitian (positive) field operators spanning all ``|a><b|``.

    Returns the 4x4 inputs and, for each ``(a, b)`` with ``a <= b``, the list
    of ``(input index, coefficient)`` with ``|a><b| = sum coeff * input``.
    """
    inputs, recipe = [], {}
    eye = np.eye(4)
    for a in range(4):
        inputs.append(np.outer(eye[a], eye[a]).astype(complex))
        recipe[(a, a)] = [(len(inputs) - 1, 1.0)]
    for a in range(4):
        for b in range(a + 1, 4):
            terms = []
            for k in range(4):
                v = eye[a] + (1j ** k) * eye[b]
                inputs.append(np.outer(v, v.conj()))
                terms.append((len(inputs) - 1, 0.25 * (1j ** k)))
            recipe[(a, b)] = terms
    return np.array(inputs), recipe


def _embed_field_operators(ops):
    basis = model.enumerate_basis()
    idx = np.array(basis.field_indices())
    out = np.zeros((len(ops), len(basis), len(basis)), dtype=complex)
    out[:, idx[:, None], idx[None, :]] = ops
    return out


def _assemble_process_maps(blocks, recipe, times):
    """Combine evolved qubit blocks of the polarization inputs into maps."""
    maps = []
    for i, t in enumerate(times):
        cols = np.zeros((16, 16), dtype=complex)
        for (a, b), terms in recipe.items():
            out = sum(coeff * blocks[i, j] for j, coeff in terms)
            cols[:, 4 * a + b] = out.reshape(16)
            if a != b:
                cols[:, 4 * b + a] = out.conj().T.reshape(16)
        maps.append(ProcessMap(cols, float(t)))
    return maps


def process_map_series(params, t_grid, opts: SolverOptions = DEFAULT_OPTIONS, extra=None):
    """Process maps on a time grid, plus optional extra evolved states.

    The 16 operators ``|ij><kl|`` are never propagated directly: they are
    recovered by polarization from 28 positive inputs with the atom in 3.

    Args:
        extra: optional ``(m, 18, 18)`` density matrices propagated in the
            same integration run.

    Returns:
        ``(maps, extra_states)`` where ``extra_states`` is
        ``(len(t_grid), m, 18, 18)`` or None.
    """
    t_grid = _check_grid(t_grid)
    inputs, recipe = _polarization_inputs()
    stack = _embed_field_operators(inputs)
    m = 0
    if extra is not None:
        extra = np.asarray(extra, dtype=complex).reshape(-1, stack.shape[1], stack.shape[2])
        m = len(extra)
        stack = np.concatenate([stack, extra])
    try:
        evolved = evolve_master(params, stack, t_grid, opts)
    except IntegrationError as exc:
        times_done, states = exc.partial if exc.partial else (t_grid[:0], None)
        partial = None
        if states is not None and len(times_done):
            partial = (_assemble_process_maps(_qubit_block(states[:, : len(inputs)]), recipe, times_done),
                       states[:, len(inputs):] if m else None)
        raise IntegrationError(str(exc), exc.last_time, partial) from exc
    maps = _assemble_process_maps(_qubit_block(evolved[:, : len(inputs)]), recipe, t_grid)
    return maps, (evolved[:, len(inputs):] if m else None)


def build_process_map(params, t, opts: SolverOptions = DEFAULT_OPTIONS) -> ProcessMap:
    """Field-sector process map after interaction time ``t`` (µs)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    maps, _ = process_map_series(params, [0.0, t] if t > 0 else [0.0], opts)
    return maps[-1]
