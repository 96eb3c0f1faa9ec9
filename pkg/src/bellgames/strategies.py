"""Team strategies, their exact win probabilities, and the best classical strategy.

Three kinds of team strategy are supported:

* :class:`DeterministicStrategy` - each player has a fixed answer for every question.
* :class:`SharedRandomClassical` - a weighted mixture of deterministic strategies.
* :class:`QuantumStrategy` - a shared entangled state, a measurement per question,
  and a map from measurement outcome to answer.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .games import GREEN, RED, GameError, GameSpec, check_necklace_size, win_table
from .quantum import (
    EntangledKind,
    MeasurementSetting,
    StateVector,
    joint_distribution,
    make_entangled_state,
)

DEFAULT_CAP = 2**24


class StrategyError(ValueError):
    pass


class SearchSpaceError(StrategyError):
    pass


@dataclass(frozen=True)
class DeterministicStrategy:
    tables: tuple[Mapping, ...]

    def __post_init__(self):
        tables = tuple(dict(t) for t in self.tables)
        for t in tables:
            if any(a not in (1, -1) for a in t.values()):
                raise StrategyError("answers must be ±1")
        object.__setattr__(self, "tables", tables)

    @property
    def num_players(self) -> int:
        return len(self.tables)


@dataclass(frozen=True)
class SharedRandomClassical:
    members: tuple[DeterministicStrategy, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.members) != len(self.weights) or not self.members:
            raise StrategyError("need one weight per member and at least one member")
        if any(w < 0 for w in self.weights) or abs(math.fsum(self.weights) - 1) > 1e-12:
            raise StrategyError("mixture weights must be non-negative and sum to 1")
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "weights", tuple(self.weights))

    @property
    def num_players(self) -> int:
        return self.members[0].num_players

    def member_index(self, u: float) -> int:
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        return int(np.searchsorted(cum, u, side="right"))


@dataclass(frozen=True)
class QuantumStrategy:
    shared_state: StateVector
    settings: tuple[Mapping, ...]
    outcome_maps: tuple[Mapping[int, int], ...]

    def __post_init__(self):
        if len(self.settings) != self.shared_state.num_qubits or len(self.outcome_maps) != len(self.settings):
            raise StrategyError("one qubit, settings map and outcome map per player")
        for m in self.outcome_maps:
            if set(m) != {1, -1} or any(a not in (1, -1) for a in m.values()):
                raise StrategyError("outcome maps must send ±1 to ±1")
        object.__setattr__(self, "settings", tuple(dict(s) for s in self.settings))
        object.__setattr__(self, "outcome_maps", tuple(dict(m) for m in self.outcome_maps))

    @property
    def num_players(self) -> int:
        return len(self.settings)


StrategyProfile = Union[DeterministicStrategy, SharedRandomClassical, QuantumStrategy]


def check_profile(spec: GameSpec, profile: StrategyProfile) -> None:
    if profile.num_players != spec.num_players:
        raise StrategyError(f"{spec.name} has {spec.num_players} players, strategy has {profile.num_players}")
    if isinstance(profile, SharedRandomClassical):
        for member in profile.members:
            check_profile(spec, member)
        return
    per_player = profile.tables if isinstance(profile, DeterministicStrategy) else profile.settings
    for k, table in enumerate(per_player):
        missing = set(spec.questions_for(k)) - set(table)
        if missing:
            raise StrategyError(f"player {k + 1} has no entry for questions {sorted(missing, key=str)}")


def canonical_quantum_ghz() -> QuantumStrategy:
    settings = {"X": MeasurementSetting.pauli_x(), "Y": MeasurementSetting.pauli_y()}
    return QuantumStrategy(
        shared_state=make_entangled_state(EntangledKind.GHZ_MINUS),
        settings=(settings,) * 3,
        outcome_maps=({1: 1, -1: -1},) * 3,
    )


def bead_angle(i: int, n: int) -> float:
    return math.pi * i / n


def canonical_quantum_necklace(n: int) -> QuantumStrategy:
    """Both players measure bead ``i`` at angle pi*i/n from z; up means green."""
    try:
        n = check_necklace_size(n)
    except GameError as exc:
        raise StrategyError(str(exc)) from None
    settings = {i: MeasurementSetting.planar_xz(bead_angle(i, n)) for i in range(1, n + 1)}
    return QuantumStrategy(
        shared_state=make_entangled_state(EntangledKind.SINGLET),
        settings=(settings, settings),
        outcome_maps=({1: GREEN, -1: RED},) * 2,
    )


def _deterministic_wins(spec: GameSpec, profile: DeterministicStrategy) -> Fraction:
    total = Fraction(0)
    for q, w in zip(spec.legal_tuples, spec.tuple_weights):
        answers = tuple(table[qk] for table, qk in zip(profile.tables, q))
        if spec.predicate(q, answers):
            total += w
    return total


def deterministic_win_fraction(spec: GameSpec, profile: DeterministicStrategy) -> Fraction:
    """Exact rational win probability of a deterministic profile."""
    check_profile(spec, profile)
    return _deterministic_wins(spec, profile)


def exact_win_probability(spec: GameSpec, profile: StrategyProfile) -> float:
    check_profile(spec, profile)
    if isinstance(profile, DeterministicStrategy):
        return float(_deterministic_wins(spec, profile))
    if isinstance(profile, SharedRandomClassical):
        return math.fsum(w * float(_deterministic_wins(spec, m)) for m, w in zip(profile.members, profile.weights))
    terms = []
    for q, w in zip(spec.legal_tuples, spec.tuple_weights):
        settings = [profile.settings[k][qk] for k, qk in enumerate(q)]
        dist = joint_distribution(profile.shared_state, settings)
        for outcome, p in dist.items():
            answers = tuple(m[o] for m, o in zip(profile.outcome_maps, outcome))
            if spec.predicate(q, answers):
                terms.append(float(w) * p)
    return min(1.0, math.fsum(terms))


def profile_count(spec: GameSpec) -> int:
    return math.prod(2 ** len(spec.questions_for(k)) for k in range(spec.num_players))


def _answer_tables(num_questions: int) -> np.ndarray:
    """All answer tables in lexicographic order (+1 before -1), as 0/1 answer indices."""
    return np.array(list(itertools.product((0, 1), repeat=num_questions)), dtype=np.int8).reshape(
        -1, num_questions
    )


def brute_force_classical_optimum(
    spec: GameSpec, cap: int = DEFAULT_CAP, chunk_elements: int = 1 << 22
) -> tuple[Fraction, DeterministicStrategy]:
    """Exact best win probability over all deterministic profiles, with the first maximizer.

    Profiles are ordered lexicographically by player, then by each player's answers on
    their sorted questions, with +1 before -1. Work is chunked over the first player's
    tables; the reduction keeps the first strict maximum, so the witness does not depend
    on chunk size.
    """
    total = profile_count(spec)
    if total > cap:
        raise SearchSpaceError(f"search space exceeds cap (2^{total.bit_length() - 1} profiles > {cap})")
    m = spec.num_players
    questions = [spec.questions_for(k) for k in range(m)]
    qpos = [{q: i for i, q in enumerate(qs)} for qs in questions]
    tables = [_answer_tables(len(qs)) for qs in questions]
    sizes = [len(t) for t in tables]

    denom = math.lcm(*(w.denominator for w in spec.tuple_weights))
    int_weights = [int(w * denom) for w in spec.tuple_weights]
    wins_by_tuple = win_table(spec).astype(np.int64)

    rest = math.prod(sizes[1:])
    chunk = max(1, chunk_elements // max(rest, 1))
    best_value, best_index = -1, None
    for start in range(0, sizes[0], chunk):
        stop = min(sizes[0], start + chunk)
        shape = (stop - start, *sizes[1:])
        score = np.zeros(shape, dtype=np.int64)
        for t, q in enumerate(spec.legal_tuples):
            index = []
            for k in range(m):
                col = tables[k][:, qpos[k][q[k]]]
                if k == 0:
                    col = col[start:stop]
                bshape = [1] * m
                bshape[k] = -1
                index.append(col.reshape(bshape))
            score += int_weights[t] * wins_by_tuple[t][tuple(index)]
        flat = int(np.argmax(score))
        value = int(score.flat[flat])
        if value > best_value:
            best_value = value
            local = np.unravel_index(flat, shape)
            best_index = (local[0] + start, *local[1:])

    witness = DeterministicStrategy(
        tuple(
            {q: 1 - 2 * int(a) for q, a in zip(questions[k], tables[k][best_index[k]])}
            for k in range(m)
        )
    )
    return Fraction(best_value, denom), witness


def alternating_coloring(n: int) -> dict[int, int]:
    """Green on odd beads, red on even beads; only the pair {1, n} is colored wrongly."""
    n = check_necklace_size(n)
    return {i: GREEN if i % 2 else RED for i in range(1, n + 1)}


def best_classical_profile(spec: GameSpec, cap: int = DEFAULT_CAP) -> DeterministicStrategy:
    """Brute-force witness when the search fits under ``cap``.

    Larger necklaces fall back to both players using the alternating coloring, which
    fails on exactly one bead pair out of n.
    """
    if profile_count(spec) <= cap:
        return brute_force_classical_optimum(spec, cap)[1]
    if spec.name == "necklace":
        coloring = alternating_coloring(spec.n)
        return DeterministicStrategy((coloring, coloring))
    raise SearchSpaceError(f"search space exceeds cap ({profile_count(spec)} profiles > {cap})")


@dataclass(frozen=True)
class NecklaceCurves:
    n: int
    classical_round_win: float
    quantum_round_fail: float
    classical_session_pass: float
    quantum_session_pass: float


def closed_form_curves(n: int) -> NecklaceCurves:
    """Per-round and 5n-round session probabilities for the necklace game."""
    try:
        n = check_necklace_size(n)
    except GameError as exc:
        raise StrategyError(str(exc)) from None
    fail = math.sin(math.pi / (2 * n)) ** 2
    return NecklaceCurves(
        n=n,
        classical_round_win=1 - 1 / n,
        quantum_round_fail=fail,
        classical_session_pass=(1 - 1 / n) ** (5 * n),
        quantum_session_pass=(1 - fail) ** (5 * n),
    )


# strategy files ------------------------------------------------------------


def _parse_answer(text: str) -> int:
    table = {"+1": 1, "1": 1, "-1": -1, "G": GREEN, "R": RED}
    try:
        return table[text.strip().upper()]
    except KeyError:
        raise StrategyError(f"bad answer {text!r}") from None


def parse_strategy_text(spec: GameSpec, text: str) -> DeterministicStrategy:
    """Parse a strategy file: one line per player.

    Necklace lines are colorings like ``GRGR``; any line may instead list
    ``question:answer`` pairs such as ``X:+1 Y:-1`` or ``1:G 2:R``.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if len(lines) != spec.num_players:
        raise StrategyError(f"expected {spec.num_players} player lines, got {len(lines)}")
    tables = []
    for k, line in enumerate(lines):
        if ":" not in line:
            if spec.name != "necklace":
                raise StrategyError(f"player {k + 1}: expected question:answer pairs")
            if len(line) != spec.n or set(line.upper()) - {"G", "R"}:
                raise StrategyError(f"player {k + 1}: coloring must be {spec.n} characters from G/R")
            tables.append({i + 1: _parse_answer(c) for i, c in enumerate(line)})
            continue
        table = {}
        for item in line.split():
            q, _, a = item.partition(":")
            key = int(q) if spec.name == "necklace" else q.strip().upper()
            table[key] = _parse_answer(a)
        tables.append(table)
    profile = DeterministicStrategy(tuple(tables))
    check_profile(spec, profile)
    return profile


def load_strategy_file(spec: GameSpec, path) -> DeterministicStrategy:
    with open(path, encoding="utf-8") as fh:
        return parse_strategy_text(spec, fh.read())


def format_strategy_text(spec: GameSpec, profile: DeterministicStrategy) -> str:
    lines = []
    for k, table in enumerate(profile.tables):
        qs = spec.questions_for(k)
        if spec.name == "necklace":
            lines.append("".join("G" if table[q] == GREEN else "R" for q in qs))
        else:
            lines.append(" ".join(f"{q}:{table[q]:+d}" for q in qs))
    return "\n".join(lines) + "\n"


# per-player agents -----------------------------------------------------------


class ClassicalPlayer:
    def __init__(self, table: Mapping):
        self.table = dict(table)

    def answer(self, question, resource=None) -> int:
        return self.table[question]


class SharedRandomPlayer:
    """``resource`` is the index of the mixture member drawn from shared randomness."""

    def __init__(self, tables: Sequence[Mapping]):
        self.tables = [dict(t) for t in tables]

    def answer(self, question, resource) -> int:
        return self.tables[resource][question]


class QuantumPlayer:
    """``resource`` is this player's qubit handle, exposing ``measure(setting) -> ±1``."""

    def __init__(self, settings: Mapping, outcome_map: Mapping[int, int]):
        self.settings = dict(settings)
        self.outcome_map = dict(outcome_map)

    def setting_for(self, question) -> MeasurementSetting:
        return self.settings[question]

    def answer(self, question, resource) -> int:
        return self.outcome_map[resource.measure(self.settings[question])]


def local_players(profile: StrategyProfile) -> list:
    """Split a team strategy into per-player agents.

    Each agent answers from its own question and its own local resource only.
    """
    if isinstance(profile, DeterministicStrategy):
        return [ClassicalPlayer(t) for t in profile.tables]
    if isinstance(profile, SharedRandomClassical):
        return [SharedRandomPlayer([m.tables[k] for m in profile.members]) for k in range(profile.num_players)]
    return [QuantumPlayer(s, m) for s, m in zip(profile.settings, profile.outcome_maps)]
