import itertools
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType

from solvers.errors import (
    BudgetError,
    GameFormatError,
    LassoError,
    UnknownPlayerError,
    UnknownSlotError,
)

logger = logging.getLogger(__name__)

# Rationals are plain fractions: reduced, positive denominator, arbitrary precision.
Rational = Fraction

RATIONAL_PATTERN = re.compile(r'^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$')


def parse_rational(value):
    """
    Turn an integer or a "p/q" string into an exact rational.

    Parameters:
    -----------
    value : int, Fraction or str
        The value to convert. Floats and decimal strings are refused so that
        nothing inexact ever enters the solver.

    Returns:
    --------
    Fraction
        The value in lowest terms.
    """
    if isinstance(value, bool):
        raise GameFormatError(f"Expected a rational, got boolean {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        match = RATIONAL_PATTERN.match(value)
        if match:
            denominator = int(match.group(2)) if match.group(2) else 1
            if denominator == 0:
                raise GameFormatError(f"Zero denominator in {value!r}")
            return Fraction(int(match.group(1)), denominator)
    raise GameFormatError(f"Expected an integer or a 'p/q' string, got {value!r}")


def format_rational(value):
    """Render a rational as "p/q" (or "p" for integers)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True, eq=False)
class Arena:
    """
    Players, states, per-state action sets, a total transition function and labels.

    Profiles are tuples holding one action per player, in the order of `players`.
    """
    players: tuple
    states: tuple
    initial: str
    actions: dict
    transitions: dict
    labels: dict = field(default_factory=dict)
    alphabet: frozenset = frozenset()

    def __post_init__(self):
        players = tuple(self.players)
        states = tuple(self.states)
        if not players:
            raise GameFormatError("An arena needs at least one player")
        if len(set(players)) != len(players):
            raise GameFormatError("Duplicate player ids")
        if not states:
            raise GameFormatError("An arena needs at least one state")
        if len(set(states)) != len(states):
            raise GameFormatError("Duplicate state ids")
        if self.initial not in states:
            raise GameFormatError(f"Initial state {self.initial!r} is not a declared state")

        actions = {}
        for state in states:
            for player in players:
                available = tuple(self.actions.get((state, player), ()))
                if not available:
                    raise GameFormatError(f"Player {player!r} has no action at state {state!r}")
                if len(set(available)) != len(available):
                    raise GameFormatError(f"Duplicate actions for {player!r} at {state!r}")
                actions[(state, player)] = available
        extra = set(self.actions) - set(actions)
        if extra:
            raise GameFormatError(f"Actions declared for unknown (state, player) pairs: {sorted(extra)}")

        transitions = {}
        for state in states:
            for profile in itertools.product(*(actions[(state, p)] for p in players)):
                target = self.transitions.get((state, profile))
                if target is None:
                    raise GameFormatError(f"Transition missing for state {state!r} and profile {profile}")
                if target not in states:
                    raise GameFormatError(f"Transition from {state!r} leads to unknown state {target!r}")
                transitions[(state, profile)] = target
        if len(transitions) != len(self.transitions):
            unknown = set(self.transitions) - set(transitions)
            raise GameFormatError(f"Transitions for invalid profiles: {sorted(unknown, key=str)[:5]}")

        alphabet = frozenset(self.alphabet)
        labels = {}
        for state in states:
            atoms = frozenset(self.labels.get(state, ()))
            if alphabet and not atoms <= alphabet:
                raise GameFormatError(f"State {state!r} carries atoms outside the alphabet: {sorted(atoms - alphabet)}")
            labels[state] = atoms
        if not alphabet:
            alphabet = frozenset().union(*labels.values())

        object.__setattr__(self, 'players', players)
        object.__setattr__(self, 'states', states)
        object.__setattr__(self, 'actions', MappingProxyType(actions))
        object.__setattr__(self, 'transitions', MappingProxyType(transitions))
        object.__setattr__(self, 'labels', MappingProxyType(labels))
        object.__setattr__(self, 'alphabet', alphabet)

    def check_player(self, player):
        if player not in self.players:
            raise UnknownPlayerError(f"Unknown player {player!r}")

    def player_index(self, player):
        self.check_player(player)
        return self.players.index(player)

    def profiles(self, state):
        """All full action profiles available at `state`, in canonical order."""
        return list(itertools.product(*(self.actions[(state, p)] for p in self.players)))

    def successor(self, state, profile):
        try:
            return self.transitions[(state, tuple(profile))]
        except KeyError:
            raise LassoError(f"Profile {profile} is not available at state {state!r}") from None

    def deviation_targets(self, state, profile, player):
        """Successors reachable when `player` alone swaps its action (own action included)."""
        index = self.player_index(player)
        profile = tuple(profile)
        for action in self.actions[(state, player)]:
            deviated = profile[:index] + (action,) + profile[index + 1:]
            yield action, self.transitions[(state, deviated)]


@dataclass(frozen=True, eq=False)
class ConcurrentGame:
    """An arena together with one rational weight per (player, state)."""
    arena: Arena
    weights: dict

    def __post_init__(self):
        weights = {}
        for player in self.arena.players:
            for state in self.arena.states:
                if (player, state) not in self.weights:
                    raise GameFormatError(f"Weight missing for player {player!r} at state {state!r}")
                weights[(player, state)] = parse_rational(self.weights[(player, state)])
        if len(weights) != len(self.weights):
            raise GameFormatError("Weights declared for unknown (player, state) pairs")
        object.__setattr__(self, 'weights', MappingProxyType(weights))

    @property
    def players(self):
        return self.arena.players

    @property
    def states(self):
        return self.arena.states

    def weight(self, player, state):
        return self.weights[(player, state)]

    def weight_map(self, player):
        self.arena.check_player(player)
        return {state: self.weights[(player, state)] for state in self.arena.states}

    def slots(self):
        """Every (player, state) pair, player-major, in declaration order."""
        return [(player, state) for player in self.arena.players for state in self.arena.states]


@dataclass(frozen=True)
class RewardScheme:
    """
    Natural-number rewards per (player, state) slot; absent slots are 0.

    Entries are kept as a sorted tuple of ((player, state), amount) with zeros dropped,
    so equal schemes compare and hash equal.
    """
    entries: tuple = ()

    def __post_init__(self):
        cleaned = {}
        for slot, amount in self.entries:
            if isinstance(amount, bool) or not isinstance(amount, int):
                raise GameFormatError(f"Reward for {slot} must be a natural number, got {amount!r}")
            if amount < 0:
                raise GameFormatError(f"Reward for {slot} must be non-negative, got {amount}")
            slot = tuple(slot)
            if amount:
                cleaned[slot] = cleaned.get(slot, 0) + amount
        object.__setattr__(self, 'entries', tuple(sorted(cleaned.items(), key=lambda item: (str(item[0][0]), str(item[0][1])))))

    @classmethod
    def from_mapping(cls, rewards):
        return cls(tuple(rewards.items()))

    @property
    def rewards(self):
        return dict(self.entries)

    def amount(self, player, state):
        return self.rewards.get((player, state), 0)

    @property
    def cost(self):
        return sum(amount for _, amount in self.entries)


@dataclass(frozen=True)
class Lasso:
    """
    An ultimately periodic path: a finite prefix followed by a repeated cycle.

    Both parts are tuples of (state, profile) configurations. Use `Lasso.build` to get
    one that has been checked against an arena.
    """
    prefix: tuple
    cycle: tuple

    def __post_init__(self):
        prefix = tuple((state, tuple(profile)) for state, profile in self.prefix)
        cycle = tuple((state, tuple(profile)) for state, profile in self.cycle)
        if not cycle:
            raise LassoError("A lasso needs a non-empty cycle")
        object.__setattr__(self, 'prefix', prefix)
        object.__setattr__(self, 'cycle', cycle)

    @classmethod
    def build(cls, arena, prefix, cycle, anchored=True):
        """
        Build a lasso and check it against `arena`.

        Parameters:
        -----------
        arena : Arena
            The arena the path lives in.
        prefix, cycle : iterable of (state, profile)
            The configurations of the path.
        anchored : bool, optional
            Require the path to start at the arena's initial state.
        """
        lasso = cls(tuple(prefix), tuple(cycle))
        configurations = lasso.prefix + lasso.cycle
        for state, profile in configurations:
            if state not in arena.states:
                raise LassoError(f"Unknown state {state!r} in lasso")
            if (state, profile) not in arena.transitions:
                raise LassoError(f"Profile {profile} is not available at state {state!r}")
        for (state, profile), (following, _) in zip(configurations, configurations[1:]):
            if arena.transitions[(state, profile)] != following:
                raise LassoError(f"Step from {state!r} with {profile} does not reach {following!r}")
        last_state, last_profile = lasso.cycle[-1]
        if arena.transitions[(last_state, last_profile)] != lasso.cycle[0][0]:
            raise LassoError("The cycle does not close on its first state")
        if anchored and configurations[0][0] != arena.initial:
            raise LassoError(f"Lasso starts at {configurations[0][0]!r}, not the initial state {arena.initial!r}")
        return lasso

    def cycle_states(self):
        return [state for state, _ in self.cycle]

    def states(self):
        return [state for state, _ in self.prefix + self.cycle]


def mean_payoff(lasso, weight):
    """
    Mean-payoff (lim inf of running averages) of a lasso under a state weight map.

    Only the cycle matters: for an ultimately periodic sequence the running averages
    converge to the average over one period.
    """
    cycle_states = lasso.cycle_states()
    return Fraction(sum(Fraction(weight[state]) for state in cycle_states), len(cycle_states))


def payoff(game, lasso, player):
    """Mean-payoff of `player` along `lasso`."""
    game.arena.check_player(player)
    return mean_payoff(lasso, game.weight_map(player))


def scheme_cost(scheme):
    """Total amount handed out by a reward scheme."""
    return scheme.cost


def apply_scheme(game, scheme):
    """
    Return a new game whose weights are w + κ pointwise.

    Parameters:
    -----------
    game : ConcurrentGame
        The game to reward; it is left untouched.
    scheme : RewardScheme
        The rewards to add.

    Returns:
    --------
    ConcurrentGame
        Same arena, shifted weights.
    """
    weights = dict(game.weights)
    for (player, state), amount in scheme.entries:
        if player not in game.arena.players:
            raise UnknownPlayerError(f"Reward scheme mentions unknown player {player!r}")
        if state not in game.arena.states:
            raise UnknownSlotError(f"Reward scheme mentions unknown state {state!r}")
        weights[(player, state)] += amount
    return ConcurrentGame(game.arena, weights)


def scheme_count(slot_count, budget):
    """
    Number of reward schemes over `slot_count` slots with cost at most `budget`.

    Uses the closed form ((β+1)/m)·C(β+m, β+1), which equals the sum over b ≤ β of
    the weak compositions C(b+m-1, b).
    """
    if slot_count < 1:
        raise BudgetError("Scheme counting needs at least one slot")
    if budget < 0:
        raise BudgetError(f"Budget must be non-negative, got {budget}")
    return (budget + 1) * math.comb(budget + slot_count, budget + 1) // slot_count


def weak_compositions(total, parts):
    """
    Yield the weak compositions of `total` into `parts` parts.

    The first part takes as much as possible first, so (1, 0) comes before (0, 1).
    """
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in weak_compositions(total - head, parts - 1):
            yield (head,) + tail


def enumerate_schemes(slots, budget, start=0, stop=None):
    """
    Stream every reward scheme over `slots` with cost at most `budget`.

    Order: ascending cost, then descending lexicographic order of the amount vector
    over the slot list. `start`/`stop` cut out an index range of the stream so that
    separate workers can take disjoint chunks.

    Parameters:
    -----------
    slots : list of (player, state)
        The slots eligible for rewards.
    budget : int
        Maximum total cost.
    start, stop : int, optional
        Index range of the stream to produce.

    Yields:
    -------
    RewardScheme
    """
    if budget < 0:
        raise BudgetError(f"Budget must be non-negative, got {budget}")
    slots = [tuple(slot) for slot in slots]

    def stream():
        for cost in range(budget + 1):
            for amounts in weak_compositions(cost, len(slots)):
                yield RewardScheme(tuple((slot, amount) for slot, amount in zip(slots, amounts) if amount))

    return itertools.islice(stream(), start, stop)


def budget_upper_bound(game, punishment_table):
    """
    Largest budget worth searching for an optimum.

    Computed as ⌈Σ_i max(0, max_s pun_i(s)) · (|St| − 1)⌉, clamped at 0.
    """
    total = Fraction(0)
    for player in game.arena.players:
        best = max(punishment_table.value(player, state) for state in game.arena.states)
        total += max(Fraction(0), best)
    return max(0, math.ceil(total * (len(game.arena.states) - 1)))
