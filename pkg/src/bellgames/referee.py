"""Seeded Monte Carlo play: rounds, sessions, statistics and no-signaling diagnostics.

Randomness for session ``k`` of a run seeded with ``seed`` comes from two independent
streams, ``SeedSequence(seed, spawn_key=(k, 0))`` for the interrogator's questions and
``SeedSequence(seed, spawn_key=(k, 1))`` for the players' shared resource. Each round
draws one uniform from the question stream and one uniform per player from the
resource stream, whether or not the strategy uses them, so rounds line up across
strategies and across the in-process and networked referees.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np

from .games import GameSpec, judge, question_index_from_uniform, win_table
from .quantum import RoundSampler, partial_distribution, target_probability
from .strategies import (
    DeterministicStrategy,
    QuantumStrategy,
    SharedRandomClassical,
    StrategyProfile,
    check_profile,
    local_players,
)

Z95 = NormalDist().inv_cdf(0.975)


@dataclass(frozen=True)
class MatchRng:
    questions: np.random.Generator
    physics: np.random.Generator


def session_streams(seed: int, session: int) -> MatchRng:
    return MatchRng(
        questions=np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(session, 0))),
        physics=np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(session, 1))),
    )


def physics_stream(seed: int, session: int) -> np.random.Generator:
    return session_streams(seed, session).physics


@dataclass(frozen=True)
class SessionConfig:
    rounds_per_session: int | None = None
    num_sessions: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.rounds_per_session is not None and self.rounds_per_session < 1:
            raise ValueError("rounds_per_session must be at least 1")
        if self.num_sessions < 1:
            raise ValueError("num_sessions must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def rounds_for(self, spec: GameSpec) -> int:
        return self.rounds_per_session or spec.session_rounds_default


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    questions: tuple
    answers: tuple
    win: bool


@dataclass(frozen=True)
class RunStats:
    total_rounds: int
    wins: int
    win_rate: float
    num_sessions: int
    rounds_per_session: int
    sessions_passed: int
    session_pass_rate: float
    wilson_low: float
    wilson_high: float

    def to_document(self, digits: int = 12) -> dict:
        doc = asdict(self)
        for key, value in doc.items():
            if isinstance(value, float):
                doc[key] = float(f"{value:.{digits}g}")
        return doc


def wilson_interval(wins: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("need at least one trial")
    if not 0 <= wins <= n:
        raise ValueError("wins must lie in [0, n]")
    p = wins / n
    z2 = z * z
    denom = 1 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    low = 0.0 if wins == 0 else max(0.0, min(p, center - half))
    high = 1.0 if wins == n else min(1.0, max(p, center + half))
    return low, high


def make_stats(wins_by_session: np.ndarray, rounds: int) -> RunStats:
    """Aggregate a (sessions, rounds) boolean win array."""
    wins_by_session = np.asarray(wins_by_session, dtype=bool).reshape(-1, rounds)
    sessions = wins_by_session.shape[0]
    total = sessions * rounds
    wins = int(wins_by_session.sum())
    passed = int(wins_by_session.all(axis=1).sum())
    low, high = wilson_interval(wins, total)
    return RunStats(
        total_rounds=total,
        wins=wins,
        win_rate=wins / total,
        num_sessions=sessions,
        rounds_per_session=rounds,
        sessions_passed=passed,
        session_pass_rate=passed / sessions,
        wilson_low=low,
        wilson_high=high,
    )


# single rounds ---------------------------------------------------------------


class _QubitHandle:
    def __init__(self, sampler: RoundSampler, party: int):
        self._sampler = sampler
        self._party = party

    def measure(self, setting) -> int:
        return self._sampler.measure(self._party, setting)


def _round_resources(profile: StrategyProfile, physics_u: np.ndarray) -> list:
    m = profile.num_players
    if isinstance(profile, QuantumStrategy):
        sampler = RoundSampler(profile.shared_state, physics_u)
        return [_QubitHandle(sampler, k) for k in range(m)]
    if isinstance(profile, SharedRandomClassical):
        return [profile.member_index(float(physics_u[0]))] * m
    return [None] * m


def run_round(spec: GameSpec, profile: StrategyProfile, rng: MatchRng, round_index: int = 0) -> RoundRecord:
    """Play one round.

    For quantum strategies the referee stands in for physics: each player's qubit handle
    draws from the joint Born law conditioned on outcomes already issued this round.
    Players are asked in index order and see only their own question and handle.
    """
    check_profile(spec, profile)
    q_index = int(question_index_from_uniform(spec, rng.questions.random()))
    physics_u = rng.physics.random(spec.num_players)
    questions = spec.legal_tuples[q_index]
    resources = _round_resources(profile, physics_u)
    answers = tuple(
        int(player.answer(q, resource)) for player, q, resource in zip(local_players(profile), questions, resources)
    )
    return RoundRecord(round_index, questions, answers, judge(spec, questions, answers))


# vectorized sessions -----------------------------------------------------------


class SessionEngine:
    """Plays whole sessions with numpy, drawing the same numbers as :func:`run_round`."""

    def __init__(self, spec: GameSpec, profile: StrategyProfile):
        check_profile(spec, profile)
        self.spec = spec
        self.profile = profile
        m = spec.num_players
        self.m = m
        self.wins = win_table(spec)
        tuples = spec.legal_tuples
        if isinstance(profile, DeterministicStrategy):
            self.answers = np.array([[profile.tables[k][q[k]] for k in range(m)] for q in tuples], dtype=np.int8)
        elif isinstance(profile, SharedRandomClassical):
            self.cum = np.cumsum(profile.weights)
            self.cum[-1] = 1.0
            self.answers = np.array(
                [[[mem.tables[k][q[k]] for k in range(m)] for q in tuples] for mem in profile.members], dtype=np.int8
            )
        else:
            self._build_quantum_tables()

    def _build_quantum_tables(self):
        profile, m = self.profile, self.m
        # cond[t, k, code]: probability that player k's outcome equals the product of the
        # earlier outcomes, given those outcomes (code bit j set when outcome j is -1)
        cond = np.full((len(self.spec.legal_tuples), m, 2 ** (m - 1)), 0.5)
        for t, q in enumerate(self.spec.legal_tuples):
            settings = [profile.settings[k][q[k]] for k in range(m)]
            for k in range(m):
                probs = partial_distribution(profile.shared_state, list(range(k + 1)), settings[: k + 1])
                for prior in itertools.product((1, -1), repeat=k):
                    code = sum(1 << j for j, o in enumerate(prior) if o == -1)
                    try:
                        cond[t, k, code] = target_probability(probs, prior)[1]
                    except ValueError:
                        pass
        self.cond = cond
        self.maps = np.array([[mp[1], mp[-1]] for mp in profile.outcome_maps], dtype=np.int8)

    def play(self, rng: MatchRng, rounds: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return question indices, answers (rounds x players) and win flags."""
        q_index = question_index_from_uniform(self.spec, rng.questions.random(rounds))
        physics_u = rng.physics.random((rounds, self.m))
        profile = self.profile
        if isinstance(profile, DeterministicStrategy):
            answers = self.answers[q_index]
        elif isinstance(profile, SharedRandomClassical):
            member = np.searchsorted(self.cum, physics_u[:, 0], side="right")
            answers = self.answers[member, q_index]
        else:
            outcomes = np.empty((rounds, self.m), dtype=np.int8)
            code = np.zeros(rounds, dtype=np.int64)
            parity = np.ones(rounds, dtype=np.int8)
            for k in range(self.m):
                p = self.cond[q_index, k, code]
                o = np.where(physics_u[:, k] < p, parity, -parity).astype(np.int8)
                outcomes[:, k] = o
                code |= (o == -1).astype(np.int64) << k
                parity = parity * o
            answers = np.where(outcomes == 1, self.maps[:, 0], self.maps[:, 1]).astype(np.int8)
        answer_index = tuple(((1 - answers[:, k]) // 2).astype(np.intp) for k in range(self.m))
        wins = self.wins[(q_index, *answer_index)]
        return q_index, answers, wins


@dataclass
class Transcript:
    """Rounds in (session, round) order; an answer of 0 means none was received."""

    spec: GameSpec
    session: np.ndarray
    round: np.ndarray
    question_index: np.ndarray
    answers: np.ndarray
    wins: np.ndarray

    def __len__(self):
        return len(self.wins)

    def records(self):
        for r, t, a, w in zip(self.round.tolist(), self.question_index.tolist(), self.answers.tolist(), self.wins.tolist()):
            yield RoundRecord(r, self.spec.legal_tuples[t], tuple(a), bool(w))

    def header(self) -> list[str]:
        m = self.spec.num_players
        return ["session", "round", *(f"q{k + 1}" for k in range(m)), *(f"a{k + 1}" for k in range(m)), "win"]

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.header())
        labels = [[_csv_question(q) for q in t] for t in self.spec.legal_tuples]
        for s, r, t, a, w in zip(
            self.session.tolist(), self.round.tolist(), self.question_index.tolist(), self.answers.tolist(), self.wins.tolist()
        ):
            writer.writerow([s, r, *labels[t], *(x if x else "" for x in a), int(w)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _csv_question(q) -> str:
    return q if isinstance(q, str) else str(q)


@dataclass
class ExperimentResult:
    stats: RunStats
    transcript: Transcript | None = field(default=None, repr=False)


def run_experiment(
    spec: GameSpec, profile: StrategyProfile, cfg: SessionConfig, keep_transcript: bool = False
) -> ExperimentResult:
    """Play ``cfg.num_sessions`` independent sessions and aggregate them."""
    engine = SessionEngine(spec, profile)
    rounds = cfg.rounds_for(spec)
    wins = np.empty((cfg.num_sessions, rounds), dtype=bool)
    q_all = np.empty((cfg.num_sessions, rounds), dtype=np.int32) if keep_transcript else None
    a_all = np.empty((cfg.num_sessions, rounds, spec.num_players), dtype=np.int8) if keep_transcript else None
    for s in range(cfg.num_sessions):
        q_index, answers, w = engine.play(session_streams(cfg.seed, s), rounds)
        wins[s] = w
        if keep_transcript:
            q_all[s] = q_index
            a_all[s] = answers
    transcript = None
    if keep_transcript:
        transcript = Transcript(
            spec=spec,
            session=np.repeat(np.arange(cfg.num_sessions), rounds),
            round=np.tile(np.arange(rounds), cfg.num_sessions),
            question_index=q_all.reshape(-1),
            answers=a_all.reshape(-1, spec.num_players),
            wins=wins.reshape(-1),
        )
    return ExperimentResult(make_stats(wins, rounds), transcript)


# no-signaling -----------------------------------------------------------------


@dataclass(frozen=True)
class NoSignalingReport:
    """Largest shift in each player's answer marginal across the others' questions.

    ``worst_ratio`` compares each shift to its 4-sigma binomial noise bound,
    ``2 * sqrt(1/n1 + 1/n2)`` for buckets of sizes n1 and n2; above 1 is flagged.
    """

    max_discrepancy: tuple[float, ...]
    worst_ratio: tuple[float, ...]
    samples: int
    min_bucket: int
    flagged: bool


def no_signaling_report(spec: GameSpec, question_index: np.ndarray, answers: np.ndarray) -> NoSignalingReport:
    question_index = np.asarray(question_index)
    answers = np.asarray(answers)
    tuples = spec.legal_tuples
    m = spec.num_players
    counts = np.bincount(question_index, minlength=len(tuples))
    plus = np.stack(
        [np.bincount(question_index, weights=(answers[:, k] == 1), minlength=len(tuples)) for k in range(m)], axis=1
    )
    max_disc, worst, min_bucket = [], [], None
    for k in range(m):
        buckets: dict = {}
        for t, q in enumerate(tuples):
            if counts[t] == 0:
                continue
            buckets.setdefault(q[k], []).append((plus[t, k], counts[t]))
        disc, ratio = 0.0, 0.0
        for group in buckets.values():
            for (p1, n1), (p2, n2) in itertools.combinations(group, 2):
                d = abs(p1 / n1 - p2 / n2)
                disc = max(disc, d)
                ratio = max(ratio, d / (2 * math.sqrt(1 / n1 + 1 / n2)))
            for _, n in group:
                min_bucket = n if min_bucket is None else min(min_bucket, int(n))
        max_disc.append(float(disc))
        worst.append(float(ratio))
    return NoSignalingReport(
        max_discrepancy=tuple(max_disc),
        worst_ratio=tuple(worst),
        samples=int(len(question_index)),
        min_bucket=int(min_bucket or 0),
        flagged=any(r > 1 for r in worst),
    )


def no_signaling_check(spec: GameSpec, profile: StrategyProfile, samples: int, seed: int = 0) -> NoSignalingReport:
    if samples < 1000:
        raise ValueError("no-signaling check needs at least 1000 samples")
    engine = SessionEngine(spec, profile)
    q_index, answers, _ = engine.play(session_streams(seed, 0), samples)
    return no_signaling_report(spec, q_index, answers)
