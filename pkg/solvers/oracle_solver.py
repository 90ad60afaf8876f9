"""
Brute-force ground truth for tiny instances.

Nothing here shares code with the simplex or value-iteration paths: punishment values
come from enumerating memoryless coalition maps, LP feasibility from enumerating simple
cycles and Fourier-Motzkin elimination, and whole queries from exhaustive search.
"""
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx
import numpy as np

from solvers.errors import SizeGuardError
from solvers.game_model import Arena, ConcurrentGame, apply_scheme, enumerate_schemes
from solvers.gr1_spec import GR1Spec

logger = logging.getLogger(__name__)

ATOMS = ('p', 'q')
FORMULAS = ('p', 'q', '!p', '!q', 'p & q', 'p | q', 'p & !q', 'true')


@dataclass(frozen=True)
class SizeGuard:
    max_states: int = 5
    max_players: int = 2
    max_actions: int = 2
    max_edges: int = 10
    max_budget: int = 2

    @classmethod
    def from_config(cls, config):
        section = (config or {}).get('oracle', {}) or {}
        return cls(**{name: int(section[name]) for name in
                      ('max_states', 'max_players', 'max_actions', 'max_edges', 'max_budget')
                      if name in section})

    def check_game(self, game):
        arena = game.arena
        if len(arena.states) > self.max_states:
            raise SizeGuardError(f"{len(arena.states)} states, the oracle takes at most {self.max_states}")
        if len(arena.players) > self.max_players:
            raise SizeGuardError(f"{len(arena.players)} players, the oracle takes at most {self.max_players}")
        widest = max(len(actions) for actions in arena.actions.values())
        if widest > self.max_actions:
            raise SizeGuardError(f"{widest} actions at one state, the oracle takes at most {self.max_actions}")

    def check_edges(self, count):
        if count > self.max_edges:
            raise SizeGuardError(f"{count} edges, the oracle takes at most {self.max_edges}")

    def check_budget(self, budget):
        if budget > self.max_budget:
            raise SizeGuardError(f"Budget {budget}, the oracle takes at most {self.max_budget}")


def _best_reachable_cycle(graph, source, weight):
    reachable = nx.descendants(graph, source) | {source}
    means = [Fraction(sum(weight[state] for state in cycle), len(cycle))
             for cycle in nx.simple_cycles(graph.subgraph(reachable))]
    return max(means)


def brute_pun(game, player, state, guard=None):
    """
    pun_player(state) by enumeration: the minimum, over every memoryless coalition map,
    of the best cycle mean the player can reach from `state` in the induced graph.
    The coalition commits to its actions before the player answers.
    """
    guard = guard or SizeGuard()
    guard.check_game(game)
    arena = game.arena
    index = arena.player_index(player)
    others = [p for p in arena.players if p != player]
    weight = game.weight_map(player)
    options = [list(itertools.product(*(arena.actions[(s, p)] for p in others))) for s in arena.states]

    best = None
    for choice in itertools.product(*options):
        graph = nx.DiGraph()
        for s, partial in zip(arena.states, choice):
            for action in arena.actions[(s, player)]:
                graph.add_edge(s, arena.transitions[(s, partial[:index] + (action,) + partial[index:])])
        value = _best_reachable_cycle(graph, state, weight)
        if best is None or value < best:
            best = value
    return best


def brute_pun_values(game, guard=None):
    """(player, state) -> brute_pun for the whole game."""
    return {(player, state): brute_pun(game, player, state, guard)
            for player in game.arena.players for state in game.arena.states}


def _normalize(coefficients, rhs):
    scale = max((abs(c) for c in coefficients), default=0)
    if scale == 0:
        return coefficients, rhs
    return tuple(c / scale for c in coefficients), rhs / scale


def _drop_dominated(rows):
    """Remove rows implied by another row given that every variable is non-negative."""
    unit = [row for row in rows if sum(1 for c in row[0] if c) == 1 and row[1] <= 0]
    other = [row for row in rows if row not in unit]
    kept = []
    for k, (coefficients, rhs) in enumerate(other):
        dominated = any(j != k and all(a <= b for a, b in zip(c2, coefficients)) and r2 >= rhs
                        and ((c2, r2) != (coefficients, rhs) or j < k)
                        for j, (c2, r2) in enumerate(other))
        if not dominated:
            kept.append((coefficients, rhs))
    return unit + kept


def fourier_motzkin_feasible(rows, variables):
    """
    Decide whether {λ : coefficients·λ ≥ rhs for every row} is non-empty by eliminating
    the variables one at a time.

    Parameters:
    -----------
    rows : list of (sequence, rational)
        Inequalities over `variables` unknowns.
    variables : int
        Number of unknowns.
    """
    system = {_normalize(tuple(Fraction(c) for c in coefficients), Fraction(rhs)) for coefficients, rhs in rows}
    remaining = set(range(variables))
    while remaining:
        for coefficients, rhs in system:
            if not any(coefficients) and rhs > 0:
                return False
        system = {row for row in system if any(row[0]) or row[1] > 0}

        def cost(j):
            up = sum(1 for c, _ in system if c[j] > 0)
            down = sum(1 for c, _ in system if c[j] < 0)
            return up * down - up - down

        j = min(sorted(remaining), key=cost)
        remaining.discard(j)
        positive = [row for row in system if row[0][j] > 0]
        negative = [row for row in system if row[0][j] < 0]
        combined = {row for row in system if row[0][j] == 0}
        for up, up_rhs in positive:
            for down, down_rhs in negative:
                a, b = up[j], -down[j]
                coefficients = tuple(x / a + y / b for x, y in zip(up, down))
                combined.add(_normalize(coefficients, up_rhs / a + down_rhs / b))
        system = set(_drop_dominated(sorted(combined)))
    return all(rhs <= 0 for _, rhs in system)


def brute_cycle_feasible(edges, visit_sets, shifted, guard=None):
    """
    Is there a non-zero non-negative mix of simple cycles of the graph `edges` whose
    shifted weight sums are all non-negative and which visits every set in `visit_sets`?

    Parameters:
    -----------
    edges : iterable of (source, target)
        The subgraph, usually one SCC.
    visit_sets : list of set
        States that the mix must enter at least once each.
    shifted : list of (tag, dict)
        Weight maps that must total at least zero.
    """
    edges = list(edges)
    if guard is not None:
        guard.check_edges(len(edges))
    graph = nx.DiGraph()
    graph.add_edges_from(edges)
    cycles = sorted((tuple(cycle) for cycle in nx.simple_cycles(graph)), key=lambda c: (len(c), [str(s) for s in c]))
    if not cycles:
        return False
    count = len(cycles)
    rows = [(tuple(int(k == j) for k in range(count)), 0) for j in range(count)]
    rows.append(((1,) * count, 1))
    for _, weight in shifted:
        rows.append((tuple(sum(Fraction(weight[state]) for state in cycle) for cycle in cycles), 0))
    for targets in visit_sets:
        rows.append((tuple(sum(1 for state in cycle if state in targets) for cycle in cycles), 1))
    return fourier_motzkin_feasible(rows, count)


def _secured_edges(game, pun, z):
    """Edges of G[z] computed from scratch, or None when the initial state does not survive."""
    arena = game.arena
    allowed = {state for state in arena.states
               if state == arena.initial or all(pun[(p, state)] <= z[p] for p in arena.players)}
    kept = []
    for state in arena.states:
        if state not in allowed:
            continue
        for profile in itertools.product(*(arena.actions[(state, p)] for p in arena.players)):
            secure = True
            for index, player in enumerate(arena.players):
                for action in arena.actions[(state, player)]:
                    deviated = profile[:index] + (action,) + profile[index + 1:]
                    if pun[(player, arena.transitions[(state, deviated)])] > z[player]:
                        secure = False
            if secure:
                kept.append((state, arena.transitions[(state, profile)]))
    while True:
        sources = {source for source, _ in kept}
        pruned = [(source, target) for source, target in kept if target in sources]
        if len(pruned) == len(kept):
            break
        kept = pruned
    if arena.initial not in {source for source, _ in kept}:
        return None
    return set(kept)


def _pieces(edges, forbidden=()):
    graph = nx.DiGraph()
    graph.add_edges_from((u, v) for u, v in edges if u not in forbidden and v not in forbidden)
    for members in nx.strongly_connected_components(graph):
        inner = [(u, v) for u, v in graph.edges if u in members and v in members]
        if inner:
            yield inner


def _ne_path_exists(game, pun, predicate, spec):
    arena = game.arena
    players = arena.players
    psi_sets = spec.assumption_sets(game) if spec else []
    theta_sets = spec.guarantee_sets(game) if spec else []
    value_sets = [sorted({pun[(p, s)] for s in arena.states}) for p in players]
    for values in itertools.product(*value_sets):
        z = dict(zip(players, values))
        edges = _secured_edges(game, pun, z)
        if edges is None:
            continue
        graph = nx.DiGraph()
        graph.add_edges_from(edges)
        reachable = nx.descendants(graph, arena.initial) | {arena.initial}
        shifted = [(p, {s: game.weight(p, s) - z[p] for s in arena.states}) for p in players]
        for component in _pieces(graph.subgraph(reachable).edges):
            if predicate == 'any':
                if brute_cycle_feasible(component, [], shifted):
                    return True
            elif predicate == 'sat':
                if brute_cycle_feasible(component, theta_sets, shifted):
                    return True
                for psi in psi_sets:
                    if any(brute_cycle_feasible(piece, [], shifted) for piece in _pieces(component, psi)):
                        return True
            else:
                for theta in theta_sets:
                    if any(brute_cycle_feasible(piece, psi_sets, shifted) for piece in _pieces(component, theta)):
                        return True
    return False


def brute_check(game, spec, budget, mode, guard=None):
    """
    Weak or strong implementation decided by exhaustive search over every scheme of
    cost ≤ budget, using only brute_pun and brute_cycle_feasible.
    """
    guard = guard or SizeGuard()
    guard.check_game(game)
    guard.check_budget(budget)
    spec = spec or GR1Spec()
    for scheme in enumerate_schemes(game.slots(), budget):
        rewarded = apply_scheme(game, scheme)
        pun = brute_pun_values(rewarded, guard)
        if mode == 'weak':
            if _ne_path_exists(rewarded, pun, 'sat', spec):
                return True
        elif _ne_path_exists(rewarded, pun, 'any', spec) and not _ne_path_exists(rewarded, pun, 'viol', spec):
            return True
    return False


def random_game(rng, states=3, players=2, actions=2, weight_low=-3, weight_high=3):
    """
    A random concurrent game: uniform transition table, integer weights in
    [weight_low, weight_high], each atom of ATOMS labelling a state with probability 1/2.

    Parameters:
    -----------
    rng : numpy.random.Generator
        Source of randomness; the same seed always yields the same game.
    """
    state_ids = tuple(f"s{k}" for k in range(states))
    player_ids = tuple(f"P{k + 1}" for k in range(players))
    action_table = {}
    for state in state_ids:
        for player in player_ids:
            width = int(rng.integers(1, actions + 1))
            action_table[(state, player)] = tuple(f"a{k}" for k in range(width))
    transitions = {}
    for state in state_ids:
        for profile in itertools.product(*(action_table[(state, p)] for p in player_ids)):
            transitions[(state, profile)] = state_ids[int(rng.integers(0, states))]
    labels = {state: {atom for atom in ATOMS if rng.random() < 0.5} for state in state_ids}
    arena = Arena(player_ids, state_ids, state_ids[0], action_table, transitions, labels, frozenset(ATOMS))
    weights = {(player, state): int(rng.integers(weight_low, weight_high + 1))
               for player in player_ids for state in state_ids}
    return ConcurrentGame(arena, weights)


def random_spec(rng, max_assumptions=1, max_guarantees=1):
    assumptions = [FORMULAS[int(rng.integers(0, len(FORMULAS)))] for _ in range(int(rng.integers(0, max_assumptions + 1)))]
    guarantees = [FORMULAS[int(rng.integers(0, len(FORMULAS)))] for _ in range(int(rng.integers(0, max_guarantees + 1)))]
    return GR1Spec.from_strings(assumptions, guarantees)


def _random_shape(rng, guard, max_states=None):
    top = min(guard.max_states, max_states or guard.max_states)
    return dict(states=int(rng.integers(1, top + 1)),
                players=int(rng.integers(1, guard.max_players + 1)),
                actions=guard.max_actions)


def punishment_campaign(seed, count, guard=None, weight_low=-3, weight_high=3):
    """
    Compare punishment_table with brute_pun on `count` seeded random games, and check
    that every stored coalition strategy holds its player to the stored value.

    Returns:
    --------
    list
        One (kind, game index, player, state, solver value, expected value) per
        disagreement; kind is 'value' or 'strategy'.
    """
    from solvers.punishment_solver import held_value, punishment_table

    guard = guard or SizeGuard()
    rng = np.random.default_rng(seed)
    mismatches = []
    for index in range(count):
        game = random_game(rng, weight_low=weight_low, weight_high=weight_high, **_random_shape(rng, guard))
        table = punishment_table(game)
        oracle = brute_pun_values(game, guard)
        for (player, state), value in oracle.items():
            if table.value(player, state) != value:
                mismatches.append(('value', index, player, state, table.value(player, state), value))
            held = held_value(game, table, player, state)
            if held != table.value(player, state):
                mismatches.append(('strategy', index, player, state, held, table.value(player, state)))
    logger.info(f"Punishment campaign: {count} games, {len(mismatches)} mismatches")
    return mismatches


def lp_campaign(seed, count, guard=None, weight_low=-3, weight_high=3):
    """
    Compare simplex feasibility with the cycle oracle on guarantee, assumption and
    negspec instances built over random secured arenas, until `count` instances have
    been compared.

    Returns:
    --------
    (int, list)
        Instances compared, and (kind, simplex answer, oracle answer) per disagreement.
    """
    from solvers.design_solver import shifted_weights
    from solvers.lp_solver import (
        build_assumption_lp,
        build_guarantee_lp,
        build_negspec_lp,
        feasible,
        scc_reachable,
        split_component,
    )
    from solvers.punishment_solver import build_secured, pun_value_set, punishment_table

    guard = guard or SizeGuard()
    rng = np.random.default_rng(seed)
    compared, mismatches = 0, []

    def compare(kind, lp, visit_sets, shifted):
        nonlocal compared
        if len(lp.edges) > guard.max_edges:
            return
        simplex = feasible(lp) is not None
        oracle = brute_cycle_feasible(lp.edges, visit_sets, shifted, guard)
        compared += 1
        if simplex != oracle:
            mismatches.append((kind, simplex, oracle))

    attempts = 0
    while compared < count and attempts < 50 * count:
        attempts += 1
        game = random_game(rng, weight_low=weight_low, weight_high=weight_high, **_random_shape(rng, guard))
        spec = random_spec(rng, 2, 2).bind(game)
        table = punishment_table(game)
        z = {player: values[int(rng.integers(0, len(values)))]
             for player, values in ((p, pun_value_set(table, p)) for p in game.arena.players)}
        secured = build_secured(game, table, z)
        shifted = shifted_weights(game, z)
        psi_sets, theta_sets = spec.assumption_sets(game), spec.guarantee_sets(game)
        for component in scc_reachable(secured):
            compare('guarantee', build_guarantee_lp(component, shifted, theta_sets), theta_sets, shifted)
            for psi in psi_sets:
                for piece in split_component(component, psi, secured):
                    compare('assumption', build_assumption_lp(piece, shifted, psi), [], shifted)
            for theta in theta_sets:
                for piece in split_component(component, theta, secured):
                    compare('negspec', build_negspec_lp(piece, shifted, psi_sets, theta), psi_sets, shifted)
    logger.info(f"LP campaign: {compared} instances, {len(mismatches)} mismatches")
    return compared, mismatches


def query_campaign(seed, count, guard=None, settings=None, max_states=4):
    """
    Compare design_solver.check with brute_check on `count` seeded random queries,
    alternating weak and strong mode.

    Returns:
    --------
    list
        (query index, mode, budget, solver answer, oracle answer) per disagreement.
    """
    from solvers.design_solver import Query, check

    guard = guard or SizeGuard()
    rng = np.random.default_rng(seed)
    mismatches = []
    for index in range(count):
        game = random_game(rng, **_random_shape(rng, guard, max_states))
        spec = random_spec(rng)
        budget = int(rng.integers(0, guard.max_budget + 1))
        mode = 'weak' if index % 2 == 0 else 'strong'
        solver = check(Query(game, spec, budget, mode), settings).answer
        oracle = brute_check(game, spec, budget, mode, guard)
        if solver != oracle:
            mismatches.append((index, mode, budget, solver, oracle))
    logger.info(f"Query campaign: {count} queries, {len(mismatches)} mismatches")
    return mismatches
