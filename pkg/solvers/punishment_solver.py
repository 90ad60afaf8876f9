import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx
import numpy as np

from solvers.errors import DeadEndError

logger = logging.getLogger(__name__)

MAX_NODE = 'max'
MIN_NODE = 'min'


@dataclass(frozen=True, eq=False)
class TurnBasedMPG:
    """
    Two-player zero-sum mean-payoff game played by `player` (maximizer) against the
    coalition of everybody else (minimizer).

    Node ids are ('coalition', state) and ('player', state, coalition_profile).
    `successors` maps every node to a tuple of (label, node) pairs: coalition nodes are
    labelled by the coalition's partial profile, player nodes by the player's action.
    """
    player: str
    nodes: tuple
    owner: dict
    successors: dict
    weights: dict
    origin: dict

    def digraph(self, fixed=None):
        """
        The underlying weighted graph, optionally with some nodes pinned to one successor.

        Parameters:
        -----------
        fixed : dict, optional
            node -> successor node for the nodes whose choice is fixed.
        """
        graph = nx.DiGraph()
        for node in self.nodes:
            graph.add_node(node, weight=self.weights[node])
        for node in self.nodes:
            if fixed and node in fixed:
                graph.add_edge(node, fixed[node])
            else:
                for _, target in self.successors[node]:
                    graph.add_edge(node, target)
        return graph


@dataclass(frozen=True)
class MPGSolution:
    values: dict
    choices: dict
    certified: bool


@dataclass(frozen=True, eq=False)
class PunishmentTable:
    """pun_i(s) for every player and state, plus the coalition's memoryless punishing choice."""
    values: dict
    strategies: dict

    def value(self, player, state):
        return self.values[(player, state)]

    def strategy(self, player, state):
        return self.strategies[(player, state)]

    def players(self):
        return sorted({player for player, _ in self.values}, key=str)


@dataclass(frozen=True, eq=False)
class SecuredArena:
    """
    The subgame G[z]: configurations that are z_i-secure for every player, closed under
    the transition function. Empty when the initial state did not survive pruning.
    """
    game: object
    z: dict
    states: frozenset
    configurations: tuple

    @property
    def is_empty(self):
        return self.game.arena.initial not in self.states

    def edges(self):
        """(source, target) -> first kept profile realising that step."""
        edges = {}
        for state, profile in self.configurations:
            target = self.game.arena.transitions[(state, profile)]
            edges.setdefault((state, target), profile)
        return edges

    def graph(self):
        graph = nx.DiGraph()
        graph.add_nodes_from(state for state in self.game.arena.states if state in self.states)
        graph.add_edges_from(self.edges())
        return graph


def sequentialize(game, player):
    """
    Turn the concurrent game into a turn-based game for `player` against the coalition.

    The coalition commits to its partial profile first, then `player` answers. Both
    half-step nodes of a state carry w_player(state), so means are preserved.

    Parameters:
    -----------
    game : ConcurrentGame
        The game to sequentialize.
    player : str
        The maximizing player.

    Returns:
    --------
    TurnBasedMPG
    """
    arena = game.arena
    index = arena.player_index(player)
    others = [p for p in arena.players if p != player]
    nodes, owner, successors, weights, origin = [], {}, {}, {}, {}

    for state in arena.states:
        coalition_node = ('coalition', state)
        weight = game.weight(player, state)
        nodes.append(coalition_node)
        owner[coalition_node] = MIN_NODE
        weights[coalition_node] = weight
        origin[coalition_node] = state
        coalition_edges = []
        for partial in itertools.product(*(arena.actions[(state, p)] for p in others)):
            player_node = ('player', state, partial)
            coalition_edges.append((partial, player_node))
            nodes.append(player_node)
            owner[player_node] = MAX_NODE
            weights[player_node] = weight
            origin[player_node] = state
            answers = []
            for action in arena.actions[(state, player)]:
                profile = partial[:index] + (action,) + partial[index:]
                answers.append((action, ('coalition', arena.transitions[(state, profile)])))
            successors[player_node] = tuple(answers)
        successors[coalition_node] = tuple(coalition_edges)

    return TurnBasedMPG(player, tuple(nodes), owner, successors, weights, origin)


def _karp_cycle_mean(graph, members, maximize, weight):
    """Karp's dynamic program on one strongly connected component, weights on entered nodes."""
    members = list(members)
    size = len(members)
    source = members[0]
    best = max if maximize else min
    walks = [{node: None for node in members}]
    walks[0][source] = Fraction(0)
    for _ in range(size):
        previous = walks[-1]
        current = {}
        for node in members:
            candidates = [previous[pred] for pred in graph.predecessors(node)
                          if pred in previous and previous[pred] is not None]
            current[node] = best(candidates) + graph.nodes[node][weight] if candidates else None
        walks.append(current)

    outer = []
    for node in members:
        final = walks[size][node]
        if final is None:
            continue
        ratios = [Fraction(final - walks[k][node], size - k)
                  for k in range(size) if walks[k][node] is not None]
        if ratios:
            # max mean: max over nodes of the min ratio; min mean mirrors it
            outer.append(min(ratios) if maximize else max(ratios))
    return best(outer)


def cycle_mean_values(graph, maximize=True, weight='weight'):
    """
    For every node, the best cycle mean among the cycles reachable from it.

    Parameters:
    -----------
    graph : networkx.DiGraph
        Node attribute `weight` holds a rational; every node needs a successor.
    maximize : bool, optional
        Best means largest (one-player maximizer) or smallest (minimizer).

    Returns:
    --------
    dict
        node -> Fraction
    """
    for node in graph.nodes:
        if graph.out_degree(node) == 0:
            raise DeadEndError(f"Node {node!r} has no successor")
    components = list(nx.strongly_connected_components(graph))
    condensed = nx.condensation(graph, components)
    mapping = condensed.graph['mapping']
    pick = max if maximize else min

    own = {}
    for component, members in enumerate(components):
        nontrivial = len(members) > 1 or any(graph.has_edge(node, node) for node in members)
        if nontrivial:
            own[component] = _karp_cycle_mean(graph.subgraph(members), members, maximize, weight)

    reach = {}
    for component in reversed(list(nx.topological_sort(condensed))):
        options = [reach[succ] for succ in condensed.successors(component)]
        if component in own:
            options.append(own[component])
        reach[component] = pick(options)
    return {node: reach[mapping[node]] for node in graph.nodes}


def max_mean_cycle(graph, source=None, weight='weight'):
    """
    Largest mean node-weight over the cycles of `graph` (reachable from `source` if given).

    Examples:
    ---------
    Two reachable self-loops with weights 1 and 3 give 3.
    """
    values = cycle_mean_values(graph, maximize=True, weight=weight)
    if source is not None:
        return values[source]
    return max(values.values())


def min_mean_cycle(graph, source=None, weight='weight'):
    values = cycle_mean_values(graph, maximize=False, weight=weight)
    if source is not None:
        return values[source]
    return min(values.values())


def _greedy_choices(tb, order, successor_index, values):
    choices = {}
    for k, node in enumerate(order):
        targets = successor_index[k]
        scores = [values[t] for t in targets]
        if tb.owner[node] == MAX_NODE:
            position = scores.index(max(scores))
        else:
            position = scores.index(min(scores))
        choices[node] = order[targets[position]]
    return choices


def _minimizer_choices(tb, values):
    """
    Minimizer choices that hold every node to its value, given exact values.

    Both sides are restricted to successors of equal value; with energy v − w(node) the
    least progress measure is lifted to a fixed point and the minimizer picks the
    successor of least measure, so every cycle it allows has mean at most v. Returns
    None when some measure overflows, meaning `values` are not the game's values.
    """
    scale = math.lcm(*(Fraction(values[node]).denominator for node in tb.nodes),
                     *(Fraction(tb.weights[node]).denominator for node in tb.nodes))
    energy = {node: int((values[node] - Fraction(tb.weights[node])) * scale) for node in tb.nodes}
    keep = {node: [target for _, target in tb.successors[node] if values[target] == values[node]]
            for node in tb.nodes}
    if any(not targets for targets in keep.values()):
        return None
    top = len(tb.nodes) * max(1, max(abs(e) for e in energy.values())) + 1
    predecessors = {node: set() for node in tb.nodes}
    for node, targets in keep.items():
        for target in targets:
            predecessors[target].add(node)

    measure = dict.fromkeys(tb.nodes, 0)
    pending = list(tb.nodes)
    while pending:
        node = pending.pop()
        scores = [measure[target] for target in keep[node]]
        best = min(scores) if tb.owner[node] == MIN_NODE else max(scores)
        lifted = min(top, max(0, best - energy[node]))
        if lifted > measure[node]:
            measure[node] = lifted
            pending.extend(predecessors[node])
    if any(value >= top for value in measure.values()):
        return None
    return {node: min(keep[node], key=lambda target: measure[target])
            for node in tb.nodes if tb.owner[node] == MIN_NODE}


def mpg_value(tb, start_rounds=8):
    """
    Exact values of a turn-based mean-payoff game at every node.

    Integer value iteration with checkpoints: at each checkpoint the greedy choices of
    both sides are fixed in turn and the resulting one-player games are solved exactly;
    when the two bounds meet the values are certified. If they never meet before
    ⌈4·n³·W⌉ rounds, the finite-horizon averages are rounded to the nearest rational with
    denominator at most n.

    Parameters:
    -----------
    tb : TurnBasedMPG
        The game.
    start_rounds : int, optional
        First checkpoint; later checkpoints double.

    Returns:
    --------
    MPGSolution
        values (node -> Fraction), choices (node -> successor node), certified flag.
    """
    order = list(tb.nodes)
    position = {node: k for k, node in enumerate(order)}
    size = len(order)
    successor_index = []
    for node in order:
        targets = [position[target] for _, target in tb.successors[node]]
        if not targets:
            raise DeadEndError(f"Node {node!r} has no successor")
        successor_index.append(targets)

    scale = math.lcm(*(Fraction(tb.weights[node]).denominator for node in order))
    integer_weights = [int(Fraction(tb.weights[node]) * scale) for node in order]
    spread = max(1, max(abs(w) for w in integer_weights))
    limit = max(1, math.ceil(4 * size ** 3 * spread))
    dtype = np.int64 if limit * spread < 2 ** 62 else object

    width = max(len(targets) for targets in successor_index)
    table = np.array([targets + [targets[0]] * (width - len(targets)) for targets in successor_index])
    maximizing = np.array([tb.owner[node] == MAX_NODE for node in order])
    weights = np.array(integer_weights, dtype=dtype)
    values = np.zeros(size, dtype=dtype)

    rounds = 0
    checkpoint = min(limit, max(1, start_rounds))
    while True:
        while rounds < checkpoint:
            gathered = values[table]
            values = weights + np.where(maximizing, gathered.max(axis=1), gathered.min(axis=1))
            rounds += 1

        choices = _greedy_choices(tb, order, successor_index, [int(v) for v in values])
        min_fixed = {node: choices[node] for node in order if tb.owner[node] == MIN_NODE}
        max_fixed = {node: choices[node] for node in order if tb.owner[node] == MAX_NODE}
        upper = cycle_mean_values(tb.digraph(min_fixed), maximize=True)
        lower = cycle_mean_values(tb.digraph(max_fixed), maximize=False)
        if upper == lower:
            logger.debug(f"Mean-payoff values for {tb.player} certified after {rounds} rounds")
            return MPGSolution(upper, choices, True)
        if checkpoint >= limit:
            break
        checkpoint = min(limit, checkpoint * 2)

    logger.warning(f"Value iteration for {tb.player} not certified after {rounds} rounds; rounding")
    rounded = {node: Fraction(int(values[k]), rounds).limit_denominator(size) / scale
               for k, node in enumerate(order)}
    held = _minimizer_choices(tb, rounded)
    if held is None or cycle_mean_values(tb.digraph(held), maximize=True) != rounded:
        logger.error(f"No minimizer strategy holds the rounded values for {tb.player}")
    else:
        choices = {**choices, **held}
    return MPGSolution(rounded, choices, False)


def punishment_table(game, start_rounds=8):
    """
    Punishment values pun_i(s) for all players and states.

    pun_i(s) is the value at the coalition node of s in the turn-based game for i; the
    stored strategy is the coalition's choice at that node.
    """
    values, strategies = {}, {}
    for player in game.arena.players:
        tb = sequentialize(game, player)
        solution = mpg_value(tb, start_rounds=start_rounds)
        for state in game.arena.states:
            node = ('coalition', state)
            values[(player, state)] = solution.values[node]
            strategies[(player, state)] = solution.choices[node][2]
        logger.debug(f"Punishment values for {player}: "
                     f"{sorted({str(v) for v in (values[(player, s)] for s in game.arena.states)})}")
    return PunishmentTable(values, strategies)


def held_value(game, table, player, state):
    """The best mean `player` can reach from `state` while the coalition plays its stored strategy."""
    tb = sequentialize(game, player)
    fixed = {('coalition', s): ('player', s, table.strategy(player, s)) for s in game.arena.states}
    return max_mean_cycle(tb.digraph(fixed), source=('coalition', state))


def pun_value_set(table, player):
    """Sorted distinct punishment values of `player`."""
    return sorted({value for (owner, _), value in table.values.items() if owner == player})


def is_z_secure(game, table, state, profile, player, threshold):
    """
    True iff every unilateral deviation of `player` from `profile` at `state` (its own
    action included) lands on a state with pun_player ≤ threshold.
    """
    return all(table.value(player, target) <= threshold
               for _, target in game.arena.deviation_targets(state, profile, player))


def build_secured(game, table, z):
    """
    Build the secured arena G[z].

    Keeps the configurations that are z_i-secure for every player i, at states whose
    punishment values stay within z (the initial state is exempt from the state test),
    then prunes to a fixed point so every kept configuration leads to a kept state and
    every kept state keeps an outgoing configuration.

    Parameters:
    -----------
    game : ConcurrentGame
        The (possibly rewarded) game.
    table : PunishmentTable
        Its punishment values.
    z : dict
        player -> threshold, each drawn from the player's punishment value set.

    Returns:
    --------
    SecuredArena
    """
    arena = game.arena
    allowed = {state for state in arena.states
               if state == arena.initial
               or all(table.value(player, state) <= z[player] for player in arena.players)}
    configurations = [(state, profile)
                      for state in arena.states if state in allowed
                      for profile in arena.profiles(state)
                      if all(is_z_secure(game, table, state, profile, player, z[player])
                             for player in arena.players)]

    while True:
        kept_states = {state for state, _ in configurations}
        pruned = [(state, profile) for state, profile in configurations
                  if arena.transitions[(state, profile)] in kept_states]
        if len(pruned) == len(configurations):
            break
        configurations = pruned

    kept_states = frozenset(state for state, _ in configurations)
    return SecuredArena(game, dict(z), kept_states, tuple(configurations))
