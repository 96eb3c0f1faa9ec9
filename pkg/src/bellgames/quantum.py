"""Exact 2- and 3-qubit state vectors, spin measurements and Born-rule sampling.

Outcomes are +1 (spin up) and -1 (spin down). Qubit 0 is the most significant
bit of the computational basis index, so amplitude ``k`` of a 2-qubit state is
the coefficient of ``|b0 b1>`` with ``k = 2*b0 + b1``.
"""
from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

NORM_TOL = 1e-12
CLIP_TOL = 1e-15

_I2 = np.eye(2, dtype=complex)
_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)

Outcome = tuple[int, ...]


class QuantumError(ValueError):
    pass


class EntangledKind(enum.Enum):
    SINGLET = "singlet"
    GHZ_MINUS = "ghz-"


@dataclass(frozen=True, eq=False)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if self.num_qubits not in (2, 3):
            raise QuantumError(f"only 2 or 3 qubits are supported, got {self.num_qubits}")
        if amps.shape != (2**self.num_qubits,):
            raise QuantumError(f"expected {2**self.num_qubits} amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise QuantumError("amplitudes must be finite")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise QuantumError(f"state is not normalized (|psi|^2 = {norm2!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "_hash", hash((self.num_qubits, amps.tobytes())))

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.num_qubits == other.num_qubits and np.array_equal(self.amplitudes, other.amplitudes)

    def __hash__(self):
        return self._hash


def make_entangled_state(kind: EntangledKind | str) -> StateVector:
    """Singlet (|01> - |10>)/sqrt2 or GHZ- (|000> - |111>)/sqrt2."""
    kind = EntangledKind(kind)
    h = 1 / math.sqrt(2)
    if kind is EntangledKind.SINGLET:
        return StateVector(2, np.array([0, h, -h, 0], dtype=complex))
    amps = np.zeros(8, dtype=complex)
    amps[0b000] = h
    amps[0b111] = -h
    return StateVector(3, amps)


def _snap(x: float) -> float:
    # exact axes for angles that are multiples of pi/2
    for exact in (0.0, 1.0, -1.0):
        if abs(x - exact) < CLIP_TOL:
            return exact
    return x


@dataclass(frozen=True)
class MeasurementSetting:
    """Spin direction: Pauli X, Pauli Y, or an angle ``theta`` from z in the x-z plane."""

    kind: str
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("X", "Y", "XZ"):
            raise QuantumError(f"unknown measurement kind {self.kind!r}")
        if self.kind != "XZ":
            if self.theta != 0.0:
                raise QuantumError("theta only applies to planar settings")
            return
        if not math.isfinite(self.theta):
            raise QuantumError("theta must be finite")
        theta = math.fmod(self.theta, 2 * math.pi)
        if theta < 0:
            theta += 2 * math.pi
        if theta >= 2 * math.pi:
            theta = 0.0
        object.__setattr__(self, "theta", float(theta))

    @classmethod
    def pauli_x(cls) -> MeasurementSetting:
        return cls("X")

    @classmethod
    def pauli_y(cls) -> MeasurementSetting:
        return cls("Y")

    @classmethod
    def planar_xz(cls, theta: float) -> MeasurementSetting:
        return cls("XZ", theta)

    def encode(self) -> str:
        if self.kind == "XZ":
            return f"XZ:{self.theta!r}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> MeasurementSetting:
        if text in ("X", "Y"):
            return cls(text)
        if text.startswith("XZ:"):
            try:
                return cls.planar_xz(float(text[3:]))
            except ValueError:
                pass
        raise QuantumError(f"cannot parse measurement setting {text!r}")

    def __str__(self):
        return self.encode()


def setting_observable(setting: MeasurementSetting) -> np.ndarray:
    """2x2 Hermitian observable with eigenvalues +1/-1 for ``setting``."""
    if setting.kind == "X":
        return _PAULI_X.copy()
    if setting.kind == "Y":
        return _PAULI_Y.copy()
    c = _snap(math.cos(setting.theta))
    s = _snap(math.sin(setting.theta))
    return np.array([[c, s], [s, -c]], dtype=complex)


def _projector(setting: MeasurementSetting | None, outcome: int) -> np.ndarray:
    if setting is None:
        return _I2
    return (_I2 + outcome * setting_observable(setting)) / 2


@dataclass(frozen=True)
class JointDistribution:
    """Probabilities of ±1 outcome tuples, one entry per tuple (zeros included)."""

    entries: Mapping[Outcome, float] = field(default_factory=dict)

    def __post_init__(self):
        entries = {}
        for outcome, p in self.entries.items():
            outcome = tuple(int(o) for o in outcome)
            if any(o not in (1, -1) for o in outcome):
                raise QuantumError(f"outcomes must be ±1, got {outcome}")
            if p < -CLIP_TOL:
                raise QuantumError(f"negative probability {p!r} for {outcome}")
            entries[outcome] = max(float(p), 0.0)
        total = math.fsum(entries.values())
        if abs(total - 1.0) > NORM_TOL:
            raise QuantumError(f"probabilities sum to {total!r}")
        object.__setattr__(self, "entries", entries)

    @property
    def num_parties(self) -> int:
        return len(next(iter(self.entries)))

    def __getitem__(self, outcome: Outcome) -> float:
        return self.entries.get(tuple(outcome), 0.0)

    def __iter__(self):
        return iter(self.entries)

    def items(self):
        return self.entries.items()

    def total(self) -> float:
        return math.fsum(self.entries.values())


def _born(state: StateVector, settings: Sequence[MeasurementSetting | None]) -> dict[Outcome, float]:
    measured = [k for k, s in enumerate(settings) if s is not None]
    probs = {}
    for outcome in itertools.product((1, -1), repeat=len(measured)):
        ops = [_I2] * state.num_qubits
        for k, o in zip(measured, outcome):
            ops[k] = _projector(settings[k], o)
        proj = ops[0]
        for op in ops[1:]:
            proj = np.kron(proj, op)
        p = float(np.vdot(state.amplitudes, proj @ state.amplitudes).real)
        if p < -CLIP_TOL:
            raise QuantumError(f"Born rule produced {p!r}")
        probs[outcome] = max(p, 0.0)
    return probs


def joint_distribution(state: StateVector, settings: Sequence[MeasurementSetting]) -> JointDistribution:
    if len(settings) != state.num_qubits:
        raise QuantumError(f"need {state.num_qubits} settings, got {len(settings)}")
    return JointDistribution(_born(state, list(settings)))


def partial_distribution(
    state: StateVector, parties: Sequence[int], settings: Sequence[MeasurementSetting]
) -> dict[Outcome, float]:
    """Outcome law for a subset of qubits measured with ``settings``, keyed in ``parties`` order.

    Unlisted qubits are left unmeasured, which is the same as marginalizing over any
    setting they might later use.
    """
    if len(set(parties)) != len(parties) or len(parties) != len(settings):
        raise QuantumError("parties and settings must be distinct and paired")
    return dict(_partial_cached(state, tuple(parties), tuple(settings)))


@functools.lru_cache(maxsize=8192)
def _partial_cached(state, parties, settings):
    per_qubit: list[MeasurementSetting | None] = [None] * state.num_qubits
    for k, s in zip(parties, settings):
        per_qubit[k] = s
    by_qubit = _born(state, per_qubit)
    order = sorted(parties)
    pos = [order.index(k) for k in parties]
    return {tuple(o[i] for i in pos): p for o, p in by_qubit.items()}


def conditional_outcome(prefix_probs: Mapping[Outcome, float], prior: Outcome, u: float) -> int:
    """Draw the next party's outcome given outcomes already issued.

    ``prefix_probs`` is the law over the issued parties plus the new one (new one last).
    The candidate tried first is the product of the prior outcomes, so for parity-type
    correlations the agreement event depends only on ``u`` and not on issue order.
    """
    target, p_target = target_probability(prefix_probs, prior)
    return target if u < p_target else -target


def target_probability(prefix_probs: Mapping[Outcome, float], prior: Outcome) -> tuple[int, float]:
    """The first-tried candidate for the next outcome and its conditional probability."""
    target = math.prod(prior) if prior else 1
    p_prior = prefix_probs.get((*prior, 1), 0.0) + prefix_probs.get((*prior, -1), 0.0)
    if p_prior <= 0.0:
        raise QuantumError(f"prior outcomes {prior} have zero probability")
    return target, prefix_probs.get((*prior, target), 0.0) / p_prior


def sample_outcome(dist: JointDistribution, rng: np.random.Generator) -> Outcome:
    """Sample an outcome tuple from ``dist`` by the chain rule, party by party."""
    n = dist.num_parties
    u = rng.random(n)
    return sample_from_uniforms(dist, u)


def sample_from_uniforms(dist: JointDistribution, u: Iterable[float]) -> Outcome:
    n = dist.num_parties
    outcome: tuple[int, ...] = ()
    for k, uk in zip(range(n), u):
        prefix = {}
        for full, p in dist.items():
            key = full[: k + 1]
            prefix[key] = prefix.get(key, 0.0) + p
        outcome = (*outcome, conditional_outcome(prefix, outcome, float(uk)))
    return outcome


class RoundSampler:
    """Issues measurement outcomes for one round, one party at a time.

    Each call sees only the outcomes already issued this round, so the first caller gets
    its marginal and later callers get the conditional law. The induced joint law equals
    :func:`joint_distribution` for the settings used. ``uniforms[i]`` drives the i-th call.
    """

    def __init__(self, state: StateVector, uniforms: Sequence[float]):
        if len(uniforms) < state.num_qubits:
            raise QuantumError("one uniform per qubit is required")
        self.state = state
        self.uniforms = [float(x) for x in uniforms]
        self.parties: list[int] = []
        self.settings: list[MeasurementSetting] = []
        self.outcomes: list[int] = []

    def measure(self, party: int, setting: MeasurementSetting) -> int:
        if not 0 <= party < self.state.num_qubits:
            raise QuantumError(f"no qubit {party}")
        if party in self.parties:
            raise QuantumError(f"qubit {party} already measured this round")
        parties = [*self.parties, party]
        settings = [*self.settings, setting]
        probs = partial_distribution(self.state, parties, settings)
        o = conditional_outcome(probs, tuple(self.outcomes), self.uniforms[len(self.outcomes)])
        self.parties.append(party)
        self.settings.append(setting)
        self.outcomes.append(o)
        return o

    def complete(self) -> bool:
        return len(self.parties) == self.state.num_qubits
