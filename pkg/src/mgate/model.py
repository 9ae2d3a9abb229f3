"""Five-level M-scheme coupled to a probe and a trigger photon mode.

The atomic ensemble is treated as one effective five-level atom with
collectively enhanced field couplings ``G_p = g_p sqrt(N_a)`` and
``G_t = g_t sqrt(N_a)``. Level 3 is the common ground state; the probe
drives 3 <-> 2, the trigger 3 <-> 4, and two classical pumps couple 1 <-> 2
(``omega1``) and 4 <-> 5 (``omega4``). Excited levels 2 and 4 decay to
1, 3 and 5.

A basis state is ``(r, n_p, n_t)``: atomic label and photon numbers. Starting
from the four two-qubit field states with the atom in 3, the Hamiltonian and
the six decay channels reach exactly 18 such states.

All rates are angular frequencies in rad/µs (hbar = 1); times are in µs.
"""

from __future__ import annotations

import dataclasses
import math
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import InvalidParamsError, NormalizationError

#: Natural linewidth of the Rb D2 line, 2*pi*6 MHz, in rad/µs.
RB_D2_GAMMA = 2 * math.pi * 6.0

#: Decay channels as (upper level l, lower level k), in canonical order.
DECAY_CHANNELS = ((2, 1), (2, 3), (2, 5), (4, 1), (4, 3), (4, 5))

#: Excitation sectors (K_p, K_t) in canonical order.
SECTORS = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2))

#: The two-qubit field basis |n_p n_t> used for gate states.
FIELD_BASIS = ((0, 0), (0, 1), (1, 0), (1, 1))

_RATE_KEYS = tuple((k, l) for (l, k) in DECAY_CHANNELS)


def _sector(r, n_p, n_t):
    return n_p + (r in (1, 2)), n_t + (r in (4, 5))


@dataclasses.dataclass(frozen=True)
class SchemeParams:
    """Physical rates of the M-scheme, all in rad/µs.

    ``gamma`` maps ``(k, l)`` to the decay rate from excited level ``l``
    (2 or 4) to lower level ``k`` (1, 3 or 5). A scalar is accepted and
    applied to all six channels.
    """

    delta1: float
    delta2: float
    delta3: float
    delta4: float
    omega1: float
    omega4: float
    G_p: float
    G_t: float
    gamma: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        gamma = self.gamma
        if isinstance(gamma, (int, float)):
            gamma = {key: float(gamma) for key in _RATE_KEYS}
        else:
            gamma = {tuple(int(i) for i in key): float(v) for key, v in dict(gamma).items()}
        if set(gamma) != set(_RATE_KEYS):
            raise InvalidParamsError(
                f"gamma must define exactly the channels {sorted(_RATE_KEYS)}, got {sorted(gamma)}"
            )
        object.__setattr__(self, "gamma", {key: gamma[key] for key in _RATE_KEYS})
        for name in ("delta1", "delta2", "delta3", "delta4", "omega1", "omega4", "G_p", "G_t"):
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            if not math.isfinite(value):
                raise InvalidParamsError(f"{name} must be finite, got {value}")
        for name in ("omega1", "omega4", "G_p", "G_t"):
            if getattr(self, name) < 0:
                raise InvalidParamsError(f"{name} must be non-negative")
        for key, value in self.gamma.items():
            if not math.isfinite(value) or value < 0:
                raise InvalidParamsError(f"gamma{key} must be finite and non-negative, got {value}")

    @property
    def eps12(self) -> float:
        """Probe two-photon detuning ``delta1 - delta2``."""
        return self.delta1 - self.delta2

    @property
    def eps34(self) -> float:
        """Trigger two-photon detuning ``delta3 - delta4``."""
        return self.delta3 - self.delta4

    def rate(self, upper: int, lower: int) -> float:
        """Decay rate of the channel ``upper -> lower``."""
        return self.gamma[(lower, upper)]

    def replace(self, **changes) -> "SchemeParams":
        return dataclasses.replace(self, **changes)

    @classmethod
    def symmetric(cls, delta, eps, omega, G, gamma) -> "SchemeParams":
        """Equal probe and trigger settings: ``delta1 = delta3 = delta``,
        ``eps12 = eps34 = eps``."""
        return cls(delta1=delta, delta2=delta - eps, delta3=delta, delta4=delta - eps,
                   omega1=omega, omega4=omega, G_p=G, G_t=G, gamma=gamma)


def transient_gate_params(gamma: float = RB_D2_GAMMA) -> SchemeParams:
    """Parameter set of the fast transient-regime gate, in rad/µs.

    delta1 = delta3 = 15 gamma, eps = 0.01 gamma, G = 22 gamma (g = 0.0022 gamma
    with N_a = 1e8), Omega = 4 gamma, every decay channel at gamma.
    """
    return SchemeParams.symmetric(delta=15 * gamma, eps=0.01 * gamma, omega=4 * gamma,
                                  G=22 * gamma, gamma=gamma)


class _BasisStateTuple(NamedTuple):
    r: int
    n_p: int
    n_t: int


class BasisState(_BasisStateTuple):
    """Collective basis state ``(r, n_p, n_t)``.

    ``r = 3`` is the all-ground ensemble; any other ``r`` is the symmetric
    single excitation of level ``r``. Only the 18 states of the canonical
    basis can be constructed.
    """

    __slots__ = ()

    def __new__(cls, r, n_p, n_t):
        r, n_p, n_t = int(r), int(n_p), int(n_t)
        if r not in range(1, 6) or n_p not in range(3) or n_t not in range(3):
            raise ValueError(f"({r}, {n_p}, {n_t}) is out of range")
        if _sector(r, n_p, n_t) not in SECTORS:
            raise ValueError(f"({r}, {n_p}, {n_t}) is not in the 18-state basis")
        return super().__new__(cls, r, n_p, n_t)

    @property
    def sector(self):
        return _sector(*self)


def conserved_sector(state) -> tuple[int, int]:
    """Excitation numbers ``(K_p, K_t)`` of a basis state.

    ``K_p`` counts probe photons plus atomic population of levels 1 and 2,
    ``K_t`` trigger photons plus population of levels 4 and 5. The
    Hamiltonian conserves both.
    """
    return BasisState(*state).sector


class BasisSet(Sequence):
    """The 18 collective states in canonical order.

    Sector-major in the order of :data:`SECTORS`, ascending ``r`` within a
    sector (each sector holds at most one state per ``r``). Index 0 is the
    stationary vacuum ``(3, 0, 0)``.
    """

    def __init__(self, states):
        self._states = tuple(BasisState(*s) for s in states)
        self._index = {s: i for i, s in enumerate(self._states)}
        if len(self._index) != len(self._states):
            raise ValueError("duplicate basis states")

    def __len__(self):
        return len(self._states)

    def __getitem__(self, i):
        return self._states[i]

    def __iter__(self) -> Iterator[BasisState]:
        return iter(self._states)

    def __contains__(self, state):
        return tuple(state) in self._index

    def __repr__(self):
        return f"BasisSet({list(self._states)})"

    def index(self, state) -> int:
        return self._index[tuple(state)]

    def sector_sizes(self) -> dict:
        sizes = {sec: 0 for sec in SECTORS}
        for s in self._states:
            sizes[s.sector] += 1
        return sizes

    def sector_indices(self, sector) -> list[int]:
        return [i for i, s in enumerate(self._states) if s.sector == tuple(sector)]

    def field_indices(self) -> list[int]:
        """Indices of ``(3, n_p, n_t)`` for the two-qubit field basis."""
        return [self._index[(3, n_p, n_t)] for n_p, n_t in FIELD_BASIS]


@lru_cache(maxsize=None)
def enumerate_basis() -> BasisSet:
    """Return the canonical 18-state basis."""
    states = []
    for k_p, k_t in SECTORS:
        for r in range(1, 6):
            n_p = k_p - (r in (1, 2))
            n_t = k_t - (r in (4, 5))
            if n_p >= 0 and n_t >= 0:
                states.append((r, n_p, n_t))
    return BasisSet(states)


def _check(params):
    if not isinstance(params, SchemeParams):
        raise InvalidParamsError(f"expected SchemeParams, got {type(params).__name__}")


def build_hamiltonian(params: SchemeParams) -> np.ndarray:
    """Interaction-picture Hamiltonian on the 18-state basis (rad/µs).

    Diagonal: eps12, delta2, 0, delta3, eps34 for r = 1..5. Couplings:
    omega1 on 1 <-> 2, omega4 on 4 <-> 5, ``G_p sqrt(n_p)`` on
    ``(3, n_p, n_t) <-> (2, n_p - 1, n_t)`` and ``G_t sqrt(n_t)`` on
    ``(3, n_p, n_t) <-> (4, n_p, n_t - 1)``.
    """
    _check(params)
    basis = enumerate_basis()
    energy = {1: params.eps12, 2: params.delta2, 3: 0.0, 4: params.delta3, 5: params.eps34}
    H = np.zeros((len(basis), len(basis)), dtype=complex)
    for i, (r, n_p, n_t) in enumerate(basis):
        H[i, i] = energy[r]

    def couple(a, b, value):
        if a in basis and b in basis:
            i, j = basis.index(a), basis.index(b)
            H[i, j] = value
            H[j, i] = value

    for r, n_p, n_t in basis:
        if r == 1:
            couple((1, n_p, n_t), (2, n_p, n_t), params.omega1)
        elif r == 5:
            couple((5, n_p, n_t), (4, n_p, n_t), params.omega4)
        elif r == 3:
            if n_p > 0:
                couple((3, n_p, n_t), (2, n_p - 1, n_t), params.G_p * math.sqrt(n_p))
            if n_t > 0:
                couple((3, n_p, n_t), (4, n_p, n_t - 1), params.G_t * math.sqrt(n_t))
    return H


class JumpOperator(NamedTuple):
    op: np.ndarray
    rate: float


def build_jump_operators(params: SchemeParams) -> list[JumpOperator]:
    """The six decay channels in the order of :data:`DECAY_CHANNELS`.

    Channel ``l -> k`` maps ``(l, n_p, n_t)`` to ``(k, n_p, n_t)`` with unit
    amplitude; the rate is carried separately. Each operator is zeroed when
    its rate is zero.
    """
    _check(params)
    basis = enumerate_basis()
    jumps = []
    for upper, lower in DECAY_CHANNELS:
        rate = params.rate(upper, lower)
        L = np.zeros((len(basis), len(basis)))
        if rate > 0:
            for j, (r, n_p, n_t) in enumerate(basis):
                if r == upper:
                    # closure of the basis guarantees the target exists
                    L[basis.index((lower, n_p, n_t)), j] = 1.0
        jumps.append(JumpOperator(L, rate))
    return jumps


def initial_state(c00, c01, c10, c11, tol: float = 1e-12) -> np.ndarray:
    """Atom in 3, field in ``sum c_ij |i_p j_t>``, as an 18-vector."""
    amps = np.array([c00, c01, c10, c11], dtype=complex)
    norm2 = float(np.sum(np.abs(amps) ** 2))
    if abs(norm2 - 1.0) > tol:
        raise NormalizationError(f"field amplitudes have norm^2 {norm2!r}, expected 1")
    basis = enumerate_basis()
    psi = np.zeros(len(basis), dtype=complex)
    psi[basis.field_indices()] = amps
    return psi


REFERENCE_AMPLITUDES = (0.5, 0.5, 0.5, 0.5)


def reference_state() -> np.ndarray:
    """Equal real amplitudes 1/2 on the four field basis states."""
    return initial_state(*REFERENCE_AMPLITUDES)


def swap_probe_trigger(params: SchemeParams) -> SchemeParams:
    """Mirror image of ``params`` under probe <-> trigger exchange.

    Levels are relabelled 1<->5, 2<->4 so the Hamiltonian energies swap as
    (eps12, delta2) <-> (eps34, delta3); decay rates follow the relabelling.
    """
    mirror = {1: 5, 3: 3, 5: 1}
    gamma = {}
    for (k, l), value in params.gamma.items():
        gamma[(mirror[k], 4 if l == 2 else 2)] = value
    delta2, delta3 = params.delta3, params.delta2
    return SchemeParams(
        delta1=delta2 + params.eps34,
        delta2=delta2,
        delta3=delta3,
        delta4=delta3 - params.eps12,
        omega1=params.omega4,
        omega4=params.omega1,
        G_p=params.G_t,
        G_t=params.G_p,
        gamma=gamma,
    )


def mirror_permutation() -> np.ndarray:
    """Index map ``perm`` with ``basis[perm[i]]`` the mirror of ``basis[i]``."""
    basis = enumerate_basis()
    relabel = {1: 5, 2: 4, 3: 3, 4: 2, 5: 1}
    return np.array([basis.index((relabel[r], n_t, n_p)) for r, n_p, n_t in basis])
