import itertools

import pytest

from solvers.game_model import Arena, ConcurrentGame, RewardScheme
from solvers.gr1_spec import GR1Spec
from utils.file_utils import load_game, load_scheme, load_spec, load_support
from utils.resource_utils import data_path


def build_game(players, states, actions, transitions, weights, labels=None, initial=None, alphabet=()):
    """
    Small games for tests.

    actions: {(state, player): [...]}, or {state: [...]} to give every player the same list.
    transitions: {(state, profile): target}, or a callable (state, profile) -> target.
    weights: {(player, state): value}, or {state: value} for one-player games.
    """
    table = {}
    for state in states:
        for player in players:
            table[(state, player)] = tuple(actions.get((state, player), actions.get(state, ('go',))))
    if callable(transitions):
        rule = transitions
        transitions = {}
        for state in states:
            for profile in itertools.product(*(table[(state, p)] for p in players)):
                transitions[(state, profile)] = rule(state, profile)
    if weights and not isinstance(next(iter(weights)), tuple):
        weights = {(players[0], state): value for state, value in weights.items()}
    arena = Arena(tuple(players), tuple(states), initial or states[0], table, transitions,
                  labels or {}, frozenset(alphabet))
    return ConcurrentGame(arena, weights)


@pytest.fixture
def make_game():
    return build_game


@pytest.fixture
def self_loop():
    """One player, one state with weight w looping on itself."""
    def factory(weight):
        return build_game(['solo'], ['s'], {}, {('s', ('go',)): 's'}, {'s': weight})
    return factory


@pytest.fixture
def pennies():
    """Matching pennies into two absorbing states: no Nash equilibrium."""
    def rule(state, profile):
        if state == 's':
            return 'A' if profile[0] == profile[1] else 'B'
        return state
    weights = {('P1', 's'): 0, ('P1', 'A'): 1, ('P1', 'B'): 0,
               ('P2', 's'): 0, ('P2', 'A'): 0, ('P2', 'B'): 1}
    return build_game(['P1', 'P2'], ['s', 'A', 'B'], {'s': ('H', 'T')}, rule, weights)


def goal_game(goals):
    """One player leaves s for a home loop worth 1 or for goal loops worth 0."""
    states = ['s', 'h'] + list(goals)
    moves = ('home',) + tuple(goals)
    def rule(state, profile):
        if state == 's':
            return 'h' if profile[0] == 'home' else profile[0]
        return state
    weights = {'s': 0, 'h': 1}
    weights.update({goal: 0 for goal in goals})
    labels = {goal: {'goal'} for goal in goals}
    return build_game(['solo'], states, {'s': moves}, rule, weights, labels, alphabet=['goal'])


@pytest.fixture
def one_goal():
    return goal_game(['l'])


@pytest.fixture
def two_goals():
    return goal_game(['l', 'r'])


@pytest.fixture
def goal_spec():
    return GR1Spec.from_strings([], ['goal'])


@pytest.fixture
def true_spec():
    return GR1Spec()


@pytest.fixture
def robot():
    return load_game(data_path('robot_game.json'))


@pytest.fixture
def robot_k8(robot):
    return load_scheme(data_path('robot_k8.json'), robot)


@pytest.fixture
def robot_support(robot):
    return load_support(data_path('robot_support.json'), robot)


@pytest.fixture
def not_collide_spec():
    return load_spec(data_path('robot_gf_not_collide.json'))


@pytest.fixture
def no_collisions_spec():
    return load_spec(data_path('robot_no_collisions.json'))


@pytest.fixture
def zero_scheme():
    return RewardScheme()


@pytest.fixture
def good_route():
    """Configurations of the robot cycle where circle takes P and square takes S."""
    return [('K0', ('via10', 'via11')), ('P0S0', ('go', 'go')),
            ('K1', ('via10', 'via11')), ('P1S1', ('go', 'go'))]
