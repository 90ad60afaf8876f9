import dataclasses
from fractions import Fraction

import pytest

from solvers.design_solver import (
    ANY,
    ESW,
    SAT,
    STRONG,
    USW,
    VIOL,
    WEAK,
    Query,
    SolverSettings,
    Welfare,
    below_threshold_equilibrium,
    certificate_problems,
    check,
    check_threshold,
    exact,
    is_efficient,
    ne_witness_exists,
    opt,
    replay_certificate,
    shifted_weights,
    uopt,
    verify_scheme,
    welfare_allowance,
)
from solvers.errors import (
    BudgetError,
    GameFormatError,
    ResourceLimitError,
    UnknownPlayerError,
    UnknownSlotError,
)
from solvers.game_model import RewardScheme, apply_scheme
from solvers.oracle_solver import SizeGuard, query_campaign

COLLIDE = {'P0R0', 'Q0S0', 'P1R1', 'Q1S1'}


def scheme(**rewards):
    return RewardScheme.from_mapping({('solo', state): amount for state, amount in rewards.items()})


def test_query_validation(two_goals, goal_spec):
    with pytest.raises(GameFormatError):
        Query(two_goals, goal_spec, 0, 'medium')
    with pytest.raises(BudgetError):
        Query(two_goals, goal_spec, -1)
    with pytest.raises(UnknownPlayerError):
        Query(two_goals, goal_spec, 0, support=[('ghost', 's')])
    with pytest.raises(UnknownSlotError):
        Query(two_goals, goal_spec, 0, support=[('solo', 'nowhere')])
    with pytest.raises(GameFormatError):
        Query(two_goals, goal_spec, 0, support=[('solo', 'l'), ('solo', 'l')])


def test_query_defaults_to_every_slot(two_goals, goal_spec):
    query = Query(two_goals, goal_spec, 1)
    assert query.support == (('solo', 's'), ('solo', 'h'), ('solo', 'l'), ('solo', 'r'))
    assert query.with_budget(3).budget == 3


def test_welfare_validation():
    assert Welfare(USW, '3/2').threshold == Fraction(3, 2)
    with pytest.raises(GameFormatError):
        Welfare('average', 1)


def test_settings_from_config():
    settings = SolverSettings.from_config({'solver': {'max_verify_calls': 5}})
    assert settings.max_verify_calls == 5
    assert settings.value_iteration_start == 8
    assert SolverSettings.from_config(None) == SolverSettings()


def test_shifted_weights(self_loop):
    game = self_loop(3)
    assert shifted_weights(game, {'solo': 1}) == [('solo', {'s': 2})]
    assert shifted_weights(game, {'solo': 1}, Welfare(ESW, 2)) == [('solo', {'s': 1})]
    rows = shifted_weights(game, {'solo': 1}, Welfare(USW, Fraction(5, 2)))
    assert rows[-1] == (USW, {'s': Fraction(1, 2)})


def test_ne_witness_predicates_on_robot(robot, no_collisions_spec, robot_k8):
    assert ne_witness_exists(robot, ANY) is not None
    bad = ne_witness_exists(robot, VIOL, no_collisions_spec)
    assert bad is not None
    assert bad.schedule.recurring_states() & COLLIDE
    assert ne_witness_exists(apply_scheme(robot, robot_k8), VIOL, no_collisions_spec) is None


def test_ne_witness_z_is_drawn_from_punishment_values(robot, not_collide_spec):
    found = ne_witness_exists(robot, SAT, not_collide_spec)
    assert found.z == {'circle': Fraction(1, 2), 'square': Fraction(1, 2)}
    assert found.predicate == SAT


def test_ne_witness_feeds_lp_sink(robot):
    seen = []
    ne_witness_exists(robot, ANY, settings=SolverSettings(lp_sink=seen.append))
    assert seen and all(lp.name == 'free' for lp in seen)


def test_weak_robot_without_rewards(robot, not_collide_spec):
    verdict = check(Query(robot, not_collide_spec, 0, WEAK))
    assert verdict.answer
    certificate = verdict.certificate
    assert certificate.scheme == RewardScheme()
    assert certificate.payoffs == {'circle': Fraction(1, 2), 'square': Fraction(1, 2)}
    assert certificate.welfare == {USW: 1, ESW: Fraction(1, 2)}
    assert verdict.stats['schemes_examined'] == 1


def test_strong_robot_without_rewards_fails(robot, no_collisions_spec):
    verdict = check(Query(robot, no_collisions_spec, 0, STRONG))
    assert not verdict.answer
    assert verdict.certificate is None
    assert verdict.violation.schedule.recurring_states() & COLLIDE


def test_strong_robot_with_rewards(robot, robot_k8, robot_support, no_collisions_spec):
    query = Query(robot, no_collisions_spec, 8, STRONG, robot_support)
    verdict = verify_scheme(query, robot_k8)
    assert verdict.answer
    assert verdict.certificate.payoffs == {'circle': 1, 'square': 1}
    assert verdict.certificate.schedule.recurring_states() <= {'K0', 'K1', 'P0S0', 'P1S1'}
    assert replay_certificate(query, verdict)


def test_no_equilibrium_in_pennies(pennies, true_spec):
    assert not check(Query(pennies, true_spec, 0, WEAK)).answer
    assert not check(Query(pennies, true_spec, 0, STRONG)).answer


def test_weak_is_implied_by_strong(robot, robot_k8, robot_support, no_collisions_spec):
    weak = Query(robot, no_collisions_spec, 8, WEAK, robot_support)
    assert verify_scheme(weak, robot_k8).answer


def test_budget_monotonicity(two_goals, goal_spec):
    answers = [check(Query(two_goals, goal_spec, budget, WEAK)).answer for budget in range(3)]
    assert answers == [False, True, True]


def test_check_returns_first_scheme_in_order(two_goals, goal_spec):
    verdict = check(Query(two_goals, goal_spec, 1, WEAK))
    assert verdict.certificate.scheme == scheme(l=1)
    assert verdict.stats['schemes_examined'] == 4


def test_support_restricts_search(two_goals, goal_spec):
    verdict = check(Query(two_goals, goal_spec, 1, WEAK, support=[('solo', 'r')]))
    assert verdict.certificate.scheme == scheme(r=1)
    assert not check(Query(two_goals, goal_spec, 1, WEAK, support=[('solo', 'h')])).answer


def test_verify_scheme_guards(two_goals, goal_spec):
    query = Query(two_goals, goal_spec, 1, WEAK, support=[('solo', 'l')])
    with pytest.raises(BudgetError):
        verify_scheme(query, scheme(l=2))
    with pytest.raises(UnknownSlotError):
        verify_scheme(query, scheme(r=1))


def test_verify_call_cap(two_goals, goal_spec):
    with pytest.raises(ResourceLimitError):
        check(Query(two_goals, goal_spec, 2, WEAK), SolverSettings(max_verify_calls=2))


def test_opt_and_exact(two_goals, goal_spec):
    result = opt(two_goals, goal_spec, WEAK)
    assert result.optimum == 1
    assert result.scheme.cost == 1
    assert exact(two_goals, goal_spec, WEAK, 1)
    assert not exact(two_goals, goal_spec, WEAK, 0)
    assert not exact(two_goals, goal_spec, WEAK, 2)
    with pytest.raises(BudgetError):
        exact(two_goals, goal_spec, WEAK, -1)


def test_opt_zero_when_already_implemented(robot, robot_support, not_collide_spec):
    assert opt(robot, not_collide_spec, WEAK, robot_support).optimum == 0
    assert exact(robot, not_collide_spec, WEAK, 0, robot_support)


def test_uopt(two_goals, one_goal, goal_spec):
    result = uopt(two_goals, goal_spec, WEAK)
    assert result.optimum == 1
    assert result.unique is False
    assert result.schemes == (scheme(l=1), scheme(r=1))
    assert uopt(one_goal, goal_spec, WEAK).unique is True


def test_is_efficient(two_goals, goal_spec):
    query = Query(two_goals, goal_spec, 2, WEAK)
    assert is_efficient(query, scheme(l=1))
    assert not is_efficient(query, scheme(l=1, r=1))
    assert not is_efficient(query, scheme(h=1))


@pytest.mark.parametrize("measure", [USW, ESW])
def test_welfare_threshold(self_loop, true_spec, measure):
    game = self_loop(3)
    for mode in (WEAK, STRONG):
        assert check_threshold(Query(game, true_spec, 0, mode, welfare=Welfare(measure, 3))).answer
        assert not check_threshold(Query(game, true_spec, 0, mode, welfare=Welfare(measure, 4))).answer
        assert not check_threshold(Query(game, true_spec, 0, mode,
                                         welfare=Welfare(measure, Fraction(3001, 1000)))).answer


@pytest.mark.parametrize("measure", [USW, ESW])
def test_threshold_at_minimum_weight_changes_nothing(two_goals, goal_spec, measure):
    for mode in (WEAK, STRONG):
        for budget in range(3):
            plain = check(Query(two_goals, goal_spec, budget, mode)).answer
            bounded = check_threshold(Query(two_goals, goal_spec, budget, mode, welfare=Welfare(measure, 0)))
            assert bounded.answer == plain


def test_welfare_bought_with_rewards(self_loop, true_spec):
    game = self_loop(3)
    verdict = check_threshold(Query(game, true_spec, 1, WEAK, welfare=Welfare(USW, 4)))
    assert verdict.certificate.scheme == scheme(s=1)
    assert verdict.certificate.welfare[USW] == 4


def choice_game(make_game):
    """A picks loop x or loop y; B only watches and earns 0 on x, 5 on y."""
    rule = lambda state, profile: profile[0] if state == 's' else state
    weights = {('A', 's'): 0, ('A', 'x'): 1, ('A', 'y'): 1, ('B', 's'): 0, ('B', 'x'): 0, ('B', 'y'): 5}
    return make_game(['A', 'B'], ['s', 'x', 'y'], {('s', 'A'): ('x', 'y')}, rule, weights)


def test_welfare_allowance(self_loop, make_game):
    assert welfare_allowance(self_loop(3), None) == 0
    assert welfare_allowance(self_loop(3), Welfare(USW, 4)) == 1
    assert welfare_allowance(self_loop(3), Welfare(ESW, Fraction(7, 2))) == 1
    assert welfare_allowance(self_loop(3), Welfare(USW, 2)) == 0
    assert welfare_allowance(choice_game(make_game), Welfare(ESW, 2)) == 12


@pytest.mark.parametrize("mode", [WEAK, STRONG])
@pytest.mark.parametrize("measure", [USW, ESW])
def test_opt_buys_welfare(self_loop, true_spec, mode, measure):
    game = self_loop(3)
    result = opt(game, true_spec, mode, welfare=Welfare(measure, 4))
    assert result.optimum == 1
    assert result.scheme == scheme(s=1)
    unique = uopt(game, true_spec, mode, welfare=Welfare(measure, 4))
    assert unique.unique is True
    assert is_efficient(Query(game, true_spec, 1, mode, welfare=Welfare(measure, 4)), scheme(s=1))


@pytest.mark.parametrize("mode", [WEAK, STRONG])
def test_opt_matches_linear_scan(one_goal, two_goals, self_loop, goal_spec, true_spec, mode):
    cases = [(one_goal, goal_spec, None), (two_goals, goal_spec, None),
             (self_loop(3), true_spec, Welfare(USW, 5)), (self_loop(3), true_spec, Welfare(ESW, Fraction(9, 2)))]
    for game, spec, welfare in cases:
        scan = next((budget for budget in range(6)
                     if check(Query(game, spec, budget, mode, welfare=welfare)).answer), None)
        assert scan is not None
        assert opt(game, spec, mode, welfare=welfare).optimum == scan


@pytest.mark.parametrize("mode", [WEAK, STRONG])
def test_budget_monotonicity_on_fixtures(one_goal, two_goals, self_loop, make_game, goal_spec, true_spec, mode):
    cases = [(one_goal, goal_spec, None), (two_goals, goal_spec, None), (two_goals, goal_spec, Welfare(USW, 1)),
             (self_loop(3), true_spec, Welfare(USW, 4)), (self_loop(3), true_spec, Welfare(ESW, 4)),
             (choice_game(make_game), true_spec, Welfare(USW, 6))]
    for game, spec, welfare in cases:
        answers = [check(Query(game, spec, budget, mode, welfare=welfare)).answer for budget in range(3)]
        assert answers == sorted(answers)


@pytest.mark.parametrize("measure", [USW, ESW])
def test_robot_threshold_at_minimum_weight(robot, robot_support, not_collide_spec, no_collisions_spec, measure):
    lowest = min(robot.weight(player, state) for player in robot.arena.players for state in robot.arena.states)
    assert lowest == -1
    for mode, spec in ((WEAK, not_collide_spec), (STRONG, no_collisions_spec)):
        answers = []
        for budget in range(2):
            plain = check(Query(robot, spec, budget, mode, robot_support)).answer
            bounded = check_threshold(Query(robot, spec, budget, mode, robot_support, Welfare(measure, lowest)))
            assert bounded.answer == plain
            answers.append(plain)
        assert answers == sorted(answers)


def test_all_equilibria_reading(make_game, true_spec):
    game = choice_game(make_game)
    high = check_threshold(Query(game, true_spec, 0, WEAK, welfare=Welfare(USW, 6)))
    assert high.answer
    assert high.certificate.payoffs == {'A': 1, 'B': 5}
    assert high.certificate.all_equilibria is False
    low = below_threshold_equilibrium(game, Welfare(USW, 6))
    assert low.schedule.recurring_states() == {'x'}

    assert check_threshold(Query(game, true_spec, 0, WEAK, welfare=Welfare(USW, 1))).certificate.all_equilibria
    assert below_threshold_equilibrium(game, Welfare(USW, 1)) is None
    assert not check_threshold(Query(game, true_spec, 0, WEAK, welfare=Welfare(ESW, 1))).certificate.all_equilibria
    assert check(Query(game, true_spec, 0, WEAK)).certificate.all_equilibria is None


def test_threshold_needs_welfare(self_loop, true_spec):
    with pytest.raises(GameFormatError):
        check_threshold(Query(self_loop(1), true_spec, 0))


def test_certificate_problems_detects_tampering(robot, not_collide_spec):
    query = Query(robot, not_collide_spec, 0, WEAK)
    certificate = check(query).certificate
    assert certificate_problems(query, certificate) == []

    lying = dataclasses.replace(certificate, payoffs={'circle': 1, 'square': Fraction(1, 2)})
    assert any('reported payoff' in problem for problem in certificate_problems(query, lying))

    off_values = dataclasses.replace(certificate, z={'circle': Fraction(1, 3), 'square': Fraction(1, 2)})
    assert any('not a punishment value' in problem for problem in certificate_problems(query, off_values))

    costly = dataclasses.replace(certificate, scheme=RewardScheme.from_mapping({('circle', 'K0'): 1}))
    assert any('exceeds budget' in problem for problem in certificate_problems(query, costly))


def test_replay_rejects_no_verdict(pennies, true_spec):
    query = Query(pennies, true_spec, 0, WEAK)
    assert not replay_certificate(query, check(query))


def test_solver_matches_oracle_on_random_queries():
    assert query_campaign(seed=5, count=12, guard=SizeGuard(max_budget=1), max_states=3) == []


@pytest.mark.campaign
def test_solver_matches_oracle_campaign():
    assert query_campaign(seed=2021, count=200, guard=SizeGuard()) == []
