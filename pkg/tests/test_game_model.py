from fractions import Fraction

import pytest

from solvers.errors import (
    BudgetError,
    GameFormatError,
    LassoError,
    UnknownPlayerError,
    UnknownSlotError,
)
from solvers.game_model import (
    Arena,
    Lasso,
    RewardScheme,
    apply_scheme,
    budget_upper_bound,
    enumerate_schemes,
    format_rational,
    mean_payoff,
    parse_rational,
    payoff,
    scheme_cost,
    scheme_count,
    weak_compositions,
)
from solvers.punishment_solver import PunishmentTable


def test_parse_rational_reduces():
    assert parse_rational("3/6") == Fraction(1, 2)
    assert parse_rational(" -4 / 2 ") == -2
    assert parse_rational(7) == 7
    assert parse_rational(Fraction(2, 3)) == Fraction(2, 3)


@pytest.mark.parametrize("value", [0.5, "1.5", True, "1/0", "abc", None])
def test_parse_rational_refuses_inexact_or_malformed(value):
    with pytest.raises(GameFormatError):
        parse_rational(value)


def test_format_rational():
    assert format_rational(Fraction(2, 4)) == "1/2"
    assert format_rational(3) == "3"
    assert format_rational(Fraction(-1, 3)) == "-1/3"


def test_arena_requires_total_transitions():
    actions = {('s', 'p'): ('a', 'b')}
    with pytest.raises(GameFormatError):
        Arena(('p',), ('s',), 's', actions, {('s', ('a',)): 's'})


def test_arena_rejects_unknown_initial_and_empty_actions():
    with pytest.raises(GameFormatError):
        Arena(('p',), ('s',), 'x', {('s', 'p'): ('a',)}, {('s', ('a',)): 's'})
    with pytest.raises(GameFormatError):
        Arena(('p',), ('s',), 's', {('s', 'p'): ()}, {})


def test_arena_rejects_labels_outside_alphabet():
    with pytest.raises(GameFormatError):
        Arena(('p',), ('s',), 's', {('s', 'p'): ('a',)}, {('s', ('a',)): 's'}, {'s': {'q'}}, frozenset({'r'}))


def test_mean_payoff_is_cycle_average(make_game):
    game = make_game(['solo'], ['a', 'b', 'c', 'd'], {}, lambda s, _: {'a': 'b', 'b': 'c', 'c': 'd', 'd': 'b'}[s],
                     {'a': 100, 'b': 1, 'c': 2, 'd': 3})
    lasso = Lasso.build(game.arena, [('a', ('go',))], [('b', ('go',)), ('c', ('go',)), ('d', ('go',))])
    assert mean_payoff(lasso, game.weight_map('solo')) == 2


def test_mean_payoff_ignores_prefix(make_game):
    game = make_game(['solo'], ['a', 'b'], {}, lambda s, _: 'b', {'a': 100, 'b': 0})
    lasso = Lasso.build(game.arena, [('a', ('go',))], [('b', ('go',))])
    assert mean_payoff(lasso, game.weight_map('solo')) == 0


def test_robot_circle_cycle_pays_one_half(robot, good_route):
    lasso = Lasso.build(robot.arena, [], good_route)
    assert payoff(robot, lasso, 'circle') == Fraction(1, 2)
    assert payoff(robot, lasso, 'square') == Fraction(1, 2)


def test_rewarded_robot_cycle_pays_one(robot, robot_k8, good_route):
    lasso = Lasso.build(robot.arena, [], good_route)
    rewarded = apply_scheme(robot, robot_k8)
    assert [rewarded.weight('circle', s) for s, _ in good_route] == [-1, 3, -1, 3]
    assert payoff(rewarded, lasso, 'circle') == 1
    assert payoff(rewarded, lasso, 'square') == 1


def test_payoff_single_self_loop(self_loop):
    game = self_loop(5)
    lasso = Lasso.build(game.arena, [], [('s', ('go',))])
    assert payoff(game, lasso, 'solo') == 5


def test_payoff_unknown_player(self_loop):
    game = self_loop(5)
    lasso = Lasso.build(game.arena, [], [('s', ('go',))])
    with pytest.raises(UnknownPlayerError):
        payoff(game, lasso, 'nobody')


def test_cycle_rotation_and_prefix_extension_keep_mean(robot, good_route):
    weight = robot.weight_map('circle')
    base = Lasso.build(robot.arena, [], good_route)
    rotated = Lasso.build(robot.arena, good_route[:1], good_route[1:] + good_route[:1])
    extended = Lasso.build(robot.arena, good_route * 3, good_route)
    assert mean_payoff(base, weight) == mean_payoff(rotated, weight) == mean_payoff(extended, weight)


def test_lasso_build_rejects_broken_paths(robot, good_route):
    with pytest.raises(LassoError):
        Lasso.build(robot.arena, [], good_route[:3])
    with pytest.raises(LassoError):
        Lasso.build(robot.arena, [], good_route[1:] + good_route[:1])
    with pytest.raises(LassoError):
        Lasso.build(robot.arena, [], [('K0', ('go', 'go'))])
    with pytest.raises(LassoError):
        Lasso((), ())


def test_lasso_unanchored(robot, good_route):
    lasso = Lasso.build(robot.arena, [], good_route[1:] + good_route[:1], anchored=False)
    assert lasso.cycle_states()[0] == 'P0S0'


def test_scheme_cost():
    assert scheme_cost(RewardScheme()) == 0
    assert scheme_cost(RewardScheme.from_mapping({('p1', 's1'): 1, ('p2', 's2'): 3})) == 4


def test_robot_scheme_cost(robot_k8):
    assert scheme_cost(robot_k8) == 8


def test_reward_scheme_validation():
    with pytest.raises(GameFormatError):
        RewardScheme.from_mapping({('p', 's'): -1})
    with pytest.raises(GameFormatError):
        RewardScheme.from_mapping({('p', 's'): 0.5})
    assert RewardScheme.from_mapping({('p', 's'): 0}) == RewardScheme()


def test_apply_scheme(self_loop):
    game = self_loop(-1)
    assert dict(apply_scheme(game, RewardScheme()).weights) == dict(game.weights)
    rewarded = apply_scheme(game, RewardScheme.from_mapping({('solo', 's'): 1}))
    assert rewarded.weight('solo', 's') == 0
    assert game.weight('solo', 's') == -1


def test_apply_scheme_unknown_keys(self_loop):
    game = self_loop(0)
    with pytest.raises(UnknownPlayerError):
        apply_scheme(game, RewardScheme.from_mapping({('ghost', 's'): 1}))
    with pytest.raises(UnknownSlotError):
        apply_scheme(game, RewardScheme.from_mapping({('solo', 'nowhere'): 1}))


def test_apply_scheme_is_additive(robot, robot_k8, good_route):
    lasso = Lasso.build(robot.arena, [], good_route)
    rewarded = apply_scheme(robot, robot_k8)
    for player in robot.arena.players:
        bonus = {state: robot_k8.amount(player, state) for state in robot.arena.states}
        assert payoff(rewarded, lasso, player) == payoff(robot, lasso, player) + mean_payoff(lasso, bonus)


@pytest.mark.parametrize("m, budget, expected", [(1, 3, 4), (2, 1, 3), (4, 2, 15), (3, 2, 10)])
def test_scheme_count_examples(m, budget, expected):
    assert scheme_count(m, budget) == expected


def test_scheme_count_matches_enumeration():
    for m in range(1, 7):
        slots = [('p', f"s{k}") for k in range(m)]
        for budget in range(7):
            schemes = list(enumerate_schemes(slots, budget))
            assert len(schemes) == scheme_count(m, budget)
            assert len(set(schemes)) == len(schemes)
            assert all(scheme.cost <= budget for scheme in schemes)


def test_scheme_count_rejects_bad_arguments():
    with pytest.raises(BudgetError):
        scheme_count(0, 2)
    with pytest.raises(BudgetError):
        scheme_count(2, -1)


def test_enumeration_order():
    x, y = ('p', 'x'), ('p', 'y')
    assert list(enumerate_schemes([x], 1)) == [RewardScheme(), RewardScheme.from_mapping({x: 1})]
    assert list(enumerate_schemes([x, y], 1)) == [
        RewardScheme(), RewardScheme.from_mapping({x: 1}), RewardScheme.from_mapping({y: 1})]


def test_enumeration_index_range():
    slots = [('p', 'x'), ('p', 'y'), ('p', 'z')]
    everything = list(enumerate_schemes(slots, 2))
    assert list(enumerate_schemes(slots, 2, start=3, stop=7)) == everything[3:7]


def test_weak_compositions():
    assert list(weak_compositions(2, 2)) == [(2, 0), (1, 1), (0, 2)]
    assert list(weak_compositions(0, 0)) == [()]
    assert list(weak_compositions(1, 0)) == []


def _table(game, values):
    return PunishmentTable({(p, s): Fraction(values[p][k]) for p in game.arena.players
                            for k, s in enumerate(game.arena.states)}, {})


def test_budget_upper_bound(make_game):
    three = make_game(['solo'], ['a', 'b', 'c'], {}, lambda s, _: s, {'a': 0, 'b': 0, 'c': 0})
    assert budget_upper_bound(three, _table(three, {'solo': [2, 1, 0]})) == 4
    assert budget_upper_bound(three, _table(three, {'solo': [-2, 0, -1]})) == 0

    players = ['P1', 'P2']
    weights = {(p, s): 0 for p in players for s in 'abcd'}
    four = make_game(players, list('abcd'), {}, lambda s, _: s, weights)
    values = {'P1': ['1/2', 0, 0, 0], 'P2': [1, 1, 0, -3]}
    assert budget_upper_bound(four, _table(four, values)) == 5
