import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from bellgames.games import GREEN, RED, ghz_spec, necklace_spec
from bellgames.quantum import MeasurementSetting, make_entangled_state
from bellgames.strategies import (
    DeterministicStrategy,
    SearchSpaceError,
    SharedRandomClassical,
    StrategyError,
    alternating_coloring,
    best_classical_profile,
    brute_force_classical_optimum,
    canonical_quantum_ghz,
    canonical_quantum_necklace,
    closed_form_curves,
    deterministic_win_fraction,
    exact_win_probability,
    format_strategy_text,
    local_players,
    parse_strategy_text,
)


def naive_optimum(spec):
    """Plain enumeration in the documented order, one profile at a time."""
    questions = [spec.questions_for(k) for k in range(spec.num_players)]
    per_player = [
        [dict(zip(qs, answers)) for answers in itertools.product((1, -1), repeat=len(qs))] for qs in questions
    ]
    best, witness = Fraction(-1), None
    for tables in itertools.product(*per_player):
        value = deterministic_win_fraction(spec, DeterministicStrategy(tables))
        if value > best:
            best, witness = value, tables
    return best, witness


def test_canonical_ghz():
    s = canonical_quantum_ghz()
    assert all(s.settings[k]["X"] == MeasurementSetting.pauli_x() for k in range(3))
    assert all(s.settings[k]["Y"] == MeasurementSetting.pauli_y() for k in range(3))
    assert s.shared_state == make_entangled_state("ghz-")
    assert all(m == {1: 1, -1: -1} for m in s.outcome_maps)


def test_canonical_necklace_angles():
    s4 = canonical_quantum_necklace(4)
    assert s4.settings[0][2] == MeasurementSetting.planar_xz(math.pi / 2)
    s100 = canonical_quantum_necklace(100)
    assert s100.settings[1][100].theta == pytest.approx(math.pi)
    assert s100.outcome_maps == ({1: GREEN, -1: RED},) * 2
    for n in (4, 10, 100):
        s = canonical_quantum_necklace(n)
        for i, j in necklace_spec(n).legal_tuples:
            gap = abs(s.settings[0][i].theta - s.settings[1][j].theta)
            expected = math.pi * (n - 1) / n if {i, j} == {1, n} else math.pi / n
            assert gap == pytest.approx(expected, abs=1e-12)
    with pytest.raises(StrategyError):
        canonical_quantum_necklace(5)


def test_ghz_quantum_certainty():
    assert abs(exact_win_probability(ghz_spec(), canonical_quantum_ghz()) - 1) < 1e-12


def test_ghz_all_plus_one_profile():
    profile = DeterministicStrategy(({"X": 1, "Y": 1},) * 3)
    assert exact_win_probability(ghz_spec(), profile) == 0.75
    assert deterministic_win_fraction(ghz_spec(), profile) == Fraction(3, 4)


def test_necklace_4_quantum_value():
    value = exact_win_probability(necklace_spec(4), canonical_quantum_necklace(4))
    assert value == pytest.approx(0.853553, abs=1e-6)
    assert abs(value - math.cos(math.pi / 8) ** 2) < 1e-12


@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_born_evaluator_reproduces_closed_form(n):
    value = exact_win_probability(necklace_spec(n), canonical_quantum_necklace(n))
    assert abs(value - (1 - math.sin(math.pi / (2 * n)) ** 2)) < 1e-12


@pytest.mark.parametrize("spec", [ghz_spec(), necklace_spec(4)], ids=lambda s: s.name)
def test_brute_force_matches_naive_enumeration(spec):
    value, witness = brute_force_classical_optimum(spec)
    naive_value, naive_witness = naive_optimum(spec)
    assert value == naive_value
    assert witness.tables == tuple(naive_witness)
    assert deterministic_win_fraction(spec, witness) == value


def test_brute_force_values():
    assert brute_force_classical_optimum(ghz_spec())[0] == Fraction(3, 4)
    for n in (4, 6, 8):
        assert brute_force_classical_optimum(necklace_spec(n))[0] == 1 - Fraction(1, n)


def test_brute_force_cap():
    with pytest.raises(SearchSpaceError, match="search space exceeds cap"):
        brute_force_classical_optimum(necklace_spec(40))
    with pytest.raises(SearchSpaceError):
        brute_force_classical_optimum(necklace_spec(6), cap=100)


@pytest.mark.parametrize("chunk", [1, 7, 256, 1 << 22])
def test_brute_force_witness_independent_of_chunking(chunk):
    spec = necklace_spec(8)
    assert brute_force_classical_optimum(spec, chunk_elements=chunk) == brute_force_classical_optimum(spec)


def test_alternating_coloring_reaches_optimum():
    for n in (4, 6, 8):
        coloring = alternating_coloring(n)
        value = deterministic_win_fraction(necklace_spec(n), DeterministicStrategy((coloring, coloring)))
        assert value == brute_force_classical_optimum(necklace_spec(n))[0]


def test_best_classical_profile_falls_back_to_alternating():
    spec = necklace_spec(100)
    profile = best_classical_profile(spec)
    assert deterministic_win_fraction(spec, profile) == Fraction(99, 100)


@pytest.mark.parametrize("spec", [ghz_spec(), necklace_spec(4), necklace_spec(6)], ids=lambda s: f"{s.name}{s.n}")
def test_mixtures_never_beat_deterministic_optimum(spec):
    rng = np.random.default_rng(31)
    optimum = float(brute_force_classical_optimum(spec)[0])
    questions = [spec.questions_for(k) for k in range(spec.num_players)]
    for _ in range(1000):
        size = int(rng.integers(1, 5))
        members = tuple(
            DeterministicStrategy(tuple({q: int(rng.choice((1, -1))) for q in qs} for qs in questions))
            for _ in range(size)
        )
        weights = rng.dirichlet(np.ones(size))
        weights = tuple(weights / weights.sum())
        value = exact_win_probability(spec, SharedRandomClassical(members, weights))
        assert value <= optimum + 1e-12


def test_closed_form_curves():
    c100 = closed_form_curves(100)
    assert c100.quantum_session_pass == pytest.approx(0.8839, abs=5e-5)
    assert c100.classical_session_pass == pytest.approx(0.00657, abs=5e-6)
    assert closed_form_curves(4).quantum_round_fail == pytest.approx(0.146447, abs=1e-6)
    assert closed_form_curves(4).quantum_round_fail == pytest.approx(
        1 - exact_win_probability(necklace_spec(4), canonical_quantum_necklace(4)), abs=1e-12
    )
    with pytest.raises(StrategyError):
        closed_form_curves(7)


def test_quantum_advantage_sweep():
    for n in range(4, 1001, 2):
        assert math.cos(math.pi / (2 * n)) ** 2 > 1 - 1 / n
    assert math.cos(math.pi / 2000) ** 2 - (1 - 1 / 1000) > 1e-6


def test_profile_consistency_checks():
    with pytest.raises(StrategyError):
        exact_win_probability(ghz_spec(), canonical_quantum_necklace(4))
    with pytest.raises(StrategyError):
        exact_win_probability(necklace_spec(6), canonical_quantum_necklace(4))
    with pytest.raises(StrategyError):
        DeterministicStrategy(({"X": 2},))
    with pytest.raises(StrategyError):
        SharedRandomClassical((DeterministicStrategy(({"X": 1},)),), (0.5,))


def test_strategy_file_round_trip():
    spec = necklace_spec(6)
    profile = parse_strategy_text(spec, "# two players\nGRGRGR\nGRGRGR\n")
    assert profile.tables[0] == {1: 1, 2: -1, 3: 1, 4: -1, 5: 1, 6: -1}
    assert format_strategy_text(spec, profile) == "GRGRGR\nGRGRGR\n"
    ghz = parse_strategy_text(ghz_spec(), "X:+1 Y:-1\nX:-1 Y:1\nX:1 Y:1\n")
    assert ghz.tables[0] == {"X": 1, "Y": -1}
    assert parse_strategy_text(ghz_spec(), format_strategy_text(ghz_spec(), ghz)) == ghz
    pairs = parse_strategy_text(necklace_spec(4), "1:G 2:R 3:G 4:R\nGRGR")
    assert pairs.tables[0] == pairs.tables[1]


@pytest.mark.parametrize(
    "text", ["GRGRGR\n", "GRGRG\nGRGRGR\n", "GRGRGX\nGRGRGR\n", "1:G\nGRGRGR\n"]
)
def test_strategy_file_errors(text):
    with pytest.raises(StrategyError):
        parse_strategy_text(necklace_spec(6), text)


def test_local_players_see_only_own_inputs():
    import inspect

    for profile in (canonical_quantum_ghz(), DeterministicStrategy(({"X": 1, "Y": 1},) * 3)):
        for agent in local_players(profile):
            params = list(inspect.signature(agent.answer).parameters)
            assert params == ["question", "resource"]
