"""The GHZ game and the impossible-necklace game.

Questions are ``"X"``/``"Y"`` for GHZ and 1-based bead indices for the necklace.
Answers are ±1; for the necklace +1 is green and -1 is red.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Callable, Hashable, Sequence

import numpy as np

Question = Hashable
QuestionTuple = tuple
GHZ_SESSION_ROUNDS = 1000

GREEN, RED = 1, -1


class GameError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GameSpec:
    name: str
    n: int | None
    num_players: int
    legal_tuples: tuple[QuestionTuple, ...]
    tuple_weights: tuple[Fraction, ...]
    predicate: Callable[[QuestionTuple, tuple[int, ...]], bool]
    session_rounds_default: int

    def __post_init__(self):
        if sum(self.tuple_weights) != 1:
            raise GameError("tuple weights must sum to 1")
        if len(self.tuple_weights) != len(self.legal_tuples):
            raise GameError("one weight per legal tuple")

    def questions_for(self, player: int) -> tuple[Question, ...]:
        """Every question ``player`` can be asked, in sorted order."""
        return tuple(sorted({t[player] for t in self.legal_tuples}, key=_question_sort_key))

    def index_of(self, questions: QuestionTuple) -> int:
        try:
            return self._index[tuple(questions)]
        except KeyError:
            raise GameError(f"illegal question tuple {questions!r} for {self.name}") from None

    @property
    def _index(self) -> dict:
        cache = self.__dict__.get("_index_cache")
        if cache is None:
            cache = {t: i for i, t in enumerate(self.legal_tuples)}
            object.__setattr__(self, "_index_cache", cache)
        return cache

    def __eq__(self, other):
        if not isinstance(other, GameSpec):
            return NotImplemented
        return (self.name, self.n) == (other.name, other.n)

    def __hash__(self):
        return hash((self.name, self.n))

    def describe(self) -> dict:
        doc = {"game": self.name}
        if self.n is not None:
            doc["n"] = self.n
        return doc


def _question_sort_key(q):
    return (isinstance(q, str), q)


def _ghz_predicate(questions, answers) -> bool:
    product = math.prod(answers)
    if questions.count("X") == 3:
        return product == -1
    return product == 1


def ghz_spec() -> GameSpec:
    tuples = (("X", "X", "X"), ("X", "Y", "Y"), ("Y", "X", "Y"), ("Y", "Y", "X"))
    return GameSpec(
        name="ghz",
        n=None,
        num_players=3,
        legal_tuples=tuples,
        tuple_weights=(Fraction(1, 4),) * 4,
        predicate=_ghz_predicate,
        session_rounds_default=GHZ_SESSION_ROUNDS,
    )


def check_necklace_size(n) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise GameError(f"necklace size must be an integer, got {n!r}")
    n = int(n)
    if n % 2:
        raise GameError(f"necklace size must be even, got {n}")
    if n < 4:
        raise GameError(f"necklace size must be at least 4, got {n}")
    return n


def _necklace_predicate(n, questions, answers) -> bool:
    i, j = questions
    a, b = answers
    if {i, j} == {1, n}:
        return a == b
    return a != b


def necklace_spec(n: int) -> GameSpec:
    n = check_necklace_size(n)
    tuples = []
    for i in range(1, n + 1):
        for j in (i - 1, i + 1):
            tuples.append((i, (j - 1) % n + 1))
    return GameSpec(
        name="necklace",
        n=n,
        num_players=2,
        legal_tuples=tuple(tuples),
        tuple_weights=(Fraction(1, len(tuples)),) * len(tuples),
        predicate=partial(_necklace_predicate, n),
        session_rounds_default=5 * n,
    )


def make_spec(game: str, n: int | None = None) -> GameSpec:
    """Build a spec from a game description such as ``{"game": "necklace", "n": 100}``."""
    if game == "ghz":
        if n is not None:
            raise GameError("the GHZ game takes no size parameter")
        return ghz_spec()
    if game == "necklace":
        if n is None:
            raise GameError("the necklace game needs a size n")
        return necklace_spec(n)
    raise GameError(f"unknown game {game!r}")


def spec_from_document(doc: dict) -> GameSpec:
    return make_spec(doc.get("game"), doc.get("n"))


def cumulative_weights(spec: GameSpec) -> np.ndarray:
    cum = np.cumsum([float(w) for w in spec.tuple_weights])
    cum[-1] = 1.0
    return cum


def question_index_from_uniform(spec: GameSpec, u):
    """Map uniform draw(s) in [0, 1) to legal tuple indices by inverse CDF."""
    return np.searchsorted(cumulative_weights(spec), u, side="right")


def sample_questions(spec: GameSpec, rng: np.random.Generator) -> QuestionTuple:
    return spec.legal_tuples[int(question_index_from_uniform(spec, rng.random()))]


def judge(spec: GameSpec, questions: Sequence[Question], answers: Sequence[int]) -> bool:
    """True if the team wins the round."""
    questions = tuple(questions)
    spec.index_of(questions)
    answers = tuple(int(a) for a in answers)
    if len(answers) != spec.num_players:
        raise GameError(f"expected {spec.num_players} answers, got {len(answers)}")
    if any(a not in (1, -1) for a in answers):
        raise GameError(f"answers must be ±1, got {answers}")
    return spec.predicate(questions, answers)


def win_table(spec: GameSpec) -> np.ndarray:
    """Boolean array ``[tuple_index, a_0, ..., a_{m-1}]`` with answer index 0 for +1, 1 for -1."""
    m = spec.num_players
    table = np.zeros((len(spec.legal_tuples),) + (2,) * m, dtype=bool)
    for t, q in enumerate(spec.legal_tuples):
        for idx in np.ndindex(*(2,) * m):
            table[(t, *idx)] = spec.predicate(q, tuple(1 - 2 * i for i in idx))
    return table


def format_question(q: Question) -> str:
    if isinstance(q, str):
        return q
    return f"bead:{q}"


def parse_question(text: str) -> Question:
    if text in ("X", "Y"):
        return text
    if text.startswith("bead:"):
        try:
            return int(text[5:])
        except ValueError:
            pass
    raise GameError(f"cannot parse question {text!r}")


def answer_color(a: int) -> str:
    return "green" if a == GREEN else "red"
