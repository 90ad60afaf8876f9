import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx

from solvers.errors import WitnessError
from solvers.game_model import format_rational

logger = logging.getLogger(__name__)

GEQ = '>='
EQ = '='


@dataclass(frozen=True)
class Row:
    """One constraint: Σ coefficient·x (relation) rhs. `tag` names the equation family."""
    coefficients: tuple
    relation: str
    rhs: Fraction
    tag: str = ''


@dataclass(frozen=True, eq=False)
class Component:
    """A strongly connected piece of the secured arena: its states and (source, target) edges."""
    states: frozenset
    edges: tuple

    def graph(self):
        graph = nx.DiGraph()
        graph.add_edges_from(self.edges)
        return graph


@dataclass(frozen=True, eq=False)
class LPInstance:
    """
    A pure feasibility program with one variable per edge of `edges`.

    `states` and `edges` describe the subgraph the rows were built over, which is also
    the subgraph witness connectors must stay in.
    """
    name: str
    edges: tuple
    states: frozenset
    rows: tuple

    def dump(self):
        """Plain-text matrix: one line per row, coefficients as p/q, relation, rhs."""
        header = ' '.join(f"x[{src}->{dst}]" for src, dst in self.edges)
        lines = [f"# {self.name}", f"# {header}"]
        for row in self.rows:
            dense = [Fraction(0)] * len(self.edges)
            for index, value in row.coefficients:
                dense[index] += value
            cells = ' '.join(format_rational(value) for value in dense)
            lines.append(f"{cells} {row.relation} {format_rational(row.rhs)}  # {row.tag}")
        return '\n'.join(lines) + '\n'


@dataclass(frozen=True)
class FeasiblePoint:
    assignment: dict


@dataclass(frozen=True)
class WitnessSchedule:
    """
    An infinite path given by rounds: a prefix, then for round t = 1, 2, … each cycle
    repeated t·multiplicity times followed by its connector into the next cycle.

    Cycles are closed state walks (the last state steps back to the first). Connector j
    lists the states walked from the start of cycle j up to, but excluding, the start of
    cycle j+1 (cyclically); it is empty when both starts coincide.
    """
    prefix: tuple
    cycles: tuple
    connectors: tuple
    source: str = ''

    def round_states(self, t=1):
        states = []
        for (cycle, multiplicity), connector in zip(self.cycles, self.connectors):
            states.extend(list(cycle) * (t * multiplicity))
            states.extend(connector)
        return states

    def recurring_states(self):
        """States visited infinitely often."""
        recurring = set()
        for cycle, _ in self.cycles:
            recurring.update(cycle)
        for connector in self.connectors:
            recurring.update(connector)
        return recurring

    def mean_payoff(self, weight):
        """Limit mean of the schedule: the multiplicity-weighted cycle average."""
        total = sum(multiplicity * sum(Fraction(weight[state]) for state in cycle)
                    for cycle, multiplicity in self.cycles)
        length = sum(multiplicity * len(cycle) for cycle, multiplicity in self.cycles)
        return Fraction(total, length)

    def to_lasso(self, secured, t=1):
        """
        The lasso made of the prefix and one round, with a kept profile on every step.

        Its cycle visits exactly the recurring states of the schedule.
        """
        from solvers.game_model import Lasso

        edges = secured.edges()
        states = list(self.prefix) + self.round_states(t)
        cycle_start = len(self.prefix)
        configurations = []
        for position, state in enumerate(states):
            following = states[position + 1] if position + 1 < len(states) else states[cycle_start]
            try:
                configurations.append((state, edges[(state, following)]))
            except KeyError:
                raise WitnessError(f"Witness steps outside the secured arena: {state!r} -> {following!r}") from None
        return Lasso.build(secured.game.arena, configurations[:cycle_start], configurations[cycle_start:])

    def to_dict(self):
        return {
            'source': self.source,
            'prefix': list(self.prefix),
            'cycles': [{'states': list(cycle), 'multiplicity': multiplicity} for cycle, multiplicity in self.cycles],
            'connectors': [list(connector) for connector in self.connectors],
        }


def _solve_phase_one(matrix, rhs, structural):
    """
    Phase one of the simplex method with Bland's rule, in exact arithmetic.

    matrix rows already have rhs ≥ 0; one artificial column per row is appended here.
    Returns the basic solution of the first `structural` columns, or None if the
    artificial objective cannot reach zero.
    """
    rows = len(matrix)
    columns = len(matrix[0]) if rows else 0
    tableau = [list(row) + [Fraction(int(i == k)) for k in range(rows)] for i, row in enumerate(matrix)]
    values = list(rhs)
    basis = [columns + i for i in range(rows)]
    costs = [-sum((tableau[i][j] for i in range(rows)), Fraction(0)) for j in range(columns)] + [Fraction(0)] * rows
    objective = sum(values, Fraction(0))

    while True:
        entering = next((j for j in range(columns) if costs[j] < 0), None)
        if entering is None:
            break
        candidates = [(values[i] / tableau[i][entering], basis[i], i)
                      for i in range(rows) if tableau[i][entering] > 0]
        if not candidates:
            # the artificial objective is bounded below, so this cannot happen
            break
        _, _, leaving = min(candidates)

        pivot = tableau[leaving][entering]
        tableau[leaving] = [value / pivot for value in tableau[leaving]]
        values[leaving] /= pivot
        for i in range(rows):
            factor = tableau[i][entering]
            if i != leaving and factor:
                tableau[i] = [a - factor * b for a, b in zip(tableau[i], tableau[leaving])]
                values[i] -= factor * values[leaving]
        factor = costs[entering]
        costs = [a - factor * b for a, b in zip(costs, tableau[leaving])]
        objective += factor * values[leaving]
        basis[leaving] = entering

    if objective != 0:
        return None
    solution = [Fraction(0)] * structural
    for i, column in enumerate(basis):
        if column < structural:
            solution[column] = values[i]
    return solution


def feasible(lp):
    """
    Decide an LP instance exactly.

    Parameters:
    -----------
    lp : LPInstance
        The instance; variables are implicitly non-negative, so pure x_e ≥ 0 rows are
        absorbed rather than given slack columns.

    Returns:
    --------
    FeasiblePoint or None
        A satisfying assignment (edge -> Fraction), or None when infeasible.
    """
    structural = len(lp.edges)
    kept = []
    for row in lp.rows:
        if (row.relation == GEQ and len(row.coefficients) == 1
                and row.coefficients[0][1] > 0 and row.rhs <= 0):
            continue
        kept.append(row)
    surplus = sum(1 for row in kept if row.relation == GEQ)

    matrix, rhs = [], []
    next_surplus = structural
    for row in kept:
        dense = [Fraction(0)] * (structural + surplus)
        for index, value in row.coefficients:
            dense[index] += Fraction(value)
        if row.relation == GEQ:
            dense[next_surplus] = Fraction(-1)
            next_surplus += 1
        bound = Fraction(row.rhs)
        if bound < 0:
            dense = [-value for value in dense]
            bound = -bound
        matrix.append(dense)
        rhs.append(bound)

    if not matrix:
        return FeasiblePoint({edge: Fraction(0) for edge in lp.edges})
    solution = _solve_phase_one(matrix, rhs, structural)
    logger.debug(f"LP {lp.name}: {len(kept)} rows x {structural} variables -> "
                 f"{'feasible' if solution is not None else 'infeasible'}")
    if solution is None:
        return None
    return FeasiblePoint(dict(zip(lp.edges, solution)))


def satisfies(lp, assignment):
    """Check an assignment against every row of `lp` exactly."""
    values = [Fraction(assignment.get(edge, 0)) for edge in lp.edges]
    if any(value < 0 for value in values):
        return False
    for row in lp.rows:
        total = sum((Fraction(c) * values[i] for i, c in row.coefficients), Fraction(0))
        if row.relation == GEQ and total < row.rhs:
            return False
        if row.relation == EQ and total != row.rhs:
            return False
    return True


def _state_order(secured):
    return {state: position for position, state in enumerate(secured.game.arena.states)}


def scc_reachable(secured):
    """
    Strongly connected components of the secured arena that are reachable from the
    initial state and contain at least one edge, ordered by their first state.
    """
    if secured.is_empty:
        return []
    graph = secured.graph()
    reachable = nx.descendants(graph, secured.game.arena.initial) | {secured.game.arena.initial}
    return _components(graph.subgraph(reachable), _state_order(secured))


def _components(graph, order):
    found = []
    for members in nx.strongly_connected_components(graph):
        edges = tuple(sorted(((u, v) for u, v in graph.edges if u in members and v in members),
                             key=lambda edge: (order[edge[0]], order[edge[1]])))
        if edges:
            found.append(Component(frozenset(members), edges))
    found.sort(key=lambda component: min(order[state] for state in component.states))
    return found


def split_component(component, forbidden, secured):
    """The edge-carrying SCCs left after deleting `forbidden` states from `component`."""
    remaining = component.states - set(forbidden)
    graph = nx.DiGraph()
    graph.add_nodes_from(remaining)
    graph.add_edges_from((u, v) for u, v in component.edges if u in remaining and v in remaining)
    return _components(graph, _state_order(secured))


def _restrict(component, forbidden):
    forbidden = set(forbidden)
    states = frozenset(component.states - forbidden)
    edges = tuple((u, v) for u, v in component.edges if u in states and v in states)
    return states, edges


def _core_rows(states, edges, shifted):
    """
    Eq1 (non-negativity), Eq2 (some edge used), Eq3 (one row per shifted weight map).

    A shifted entry is (tag, weights) or (tag, weights, rhs); the rhs defaults to 0.
    """
    rows = [Row(((k, Fraction(1)),), GEQ, Fraction(0), 'Eq1') for k in range(len(edges))]
    rows.append(Row(tuple((k, Fraction(1)) for k in range(len(edges))), GEQ, Fraction(1), 'Eq2'))
    for tag, weight, *rhs in shifted:
        coefficients = tuple((k, Fraction(weight[target])) for k, (_, target) in enumerate(edges)
                             if weight[target] != 0)
        rows.append(Row(coefficients, GEQ, Fraction(rhs[0] if rhs else 0), f"Eq3[{tag}]"))
    return rows


def _visit_row(edges, targets, tag):
    coefficients = tuple((k, Fraction(1)) for k, (_, target) in enumerate(edges) if target in targets)
    return Row(coefficients, GEQ, Fraction(1), tag)


def _flow_rows(states, edges, order):
    rows = []
    for state in sorted(states, key=lambda s: order.get(s, 0)):
        coefficients = {}
        for k, (source, target) in enumerate(edges):
            if target == state:
                coefficients[k] = coefficients.get(k, 0) + 1
            if source == state:
                coefficients[k] = coefficients.get(k, 0) - 1
        rows.append(Row(tuple((k, Fraction(v)) for k, v in coefficients.items() if v), EQ, Fraction(0), f"Eq5[{state}]"))
    return rows


def _order_of(states, edges):
    order = {}
    for source, target in edges:
        order.setdefault(source, len(order))
        order.setdefault(target, len(order))
    for state in sorted(states - set(order), key=str):
        order[state] = len(order)
    return order


def build_free_lp(component, shifted, name='free'):
    """Eq1, Eq2, Eq3 and Eq5 only: some cycle mix paying every row's shifted weights."""
    states, edges = component.states, tuple(component.edges)
    rows = _core_rows(states, edges, shifted) + _flow_rows(states, edges, _order_of(states, edges))
    return LPInstance(name, edges, frozenset(states), tuple(rows))


def build_guarantee_lp(component, shifted, theta_sets, name='guarantee'):
    """
    LP(θ1 … θn) over one component.

    Parameters:
    -----------
    component : Component
        An SCC of the secured arena.
    shifted : list of (tag, dict)
        One state weight map per Eq3 row, already shifted (w_i − z_i, welfare rows…).
    theta_sets : list of set
        V(θr) for every guarantee; each gets an Eq4 row over edges entering it.
    """
    states, edges = component.states, tuple(component.edges)
    rows = _core_rows(states, edges, shifted)
    rows.extend(_visit_row(edges, targets & states, f"Eq4[theta{r}]") for r, targets in enumerate(theta_sets, 1))
    rows.extend(_flow_rows(states, edges, _order_of(states, edges)))
    return LPInstance(name, edges, frozenset(states), tuple(rows))


def build_assumption_lp(component, shifted, psi_set, name='assumption'):
    """
    LP(ψl) over one component: the states of V(ψl) and their edges are deleted before
    the rows are built, so neither cycles nor connectors can visit them.
    """
    states, edges = _restrict(component, psi_set)
    rows = _core_rows(states, edges, shifted) + _flow_rows(states, edges, _order_of(states, edges))
    return LPInstance(name, edges, states, tuple(rows))


def build_negspec_lp(component, shifted, psi_sets, theta_set, name='negspec'):
    """
    Violation LP for one guarantee θr: V(θr) is deleted and every V(ψl) must be visited.
    """
    states, edges = _restrict(component, theta_set)
    rows = _core_rows(states, edges, shifted)
    rows.extend(_visit_row(edges, targets & states, f"Eq4[psi{l}]") for l, targets in enumerate(psi_sets, 1))
    rows.extend(_flow_rows(states, edges, _order_of(states, edges)))
    return LPInstance(name, edges, states, tuple(rows))


def decompose_flow(flow, order):
    """
    Peel an integral circulation into simple cycles with multiplicities.

    Parameters:
    -----------
    flow : dict
        (source, target) -> positive int, conserving flow at every state.
    order : dict
        state -> rank used to pick start edges deterministically.
    """
    flow = {edge: amount for edge, amount in flow.items() if amount > 0}
    cycles = []
    while flow:
        edge_key = lambda edge: (order[edge[0]], order[edge[1]])
        start = min(flow, key=edge_key)[0]
        path, seen = [start], {start: 0}
        current = start
        while True:
            outgoing = sorted((edge for edge in flow if edge[0] == current), key=edge_key)
            if not outgoing:
                raise WitnessError(f"Flow is not conserved at {current!r}")
            current = outgoing[0][1]
            if current in seen:
                break
            seen[current] = len(path)
            path.append(current)
        cycle = path[seen[current]:]
        cycle_edges = list(zip(cycle, cycle[1:] + cycle[:1]))
        multiplicity = min(flow[edge] for edge in cycle_edges)
        for edge in cycle_edges:
            flow[edge] -= multiplicity
            if flow[edge] == 0:
                del flow[edge]
        cycles.append((tuple(cycle), multiplicity))
    return cycles


def extract_witness(point, lp, secured):
    """
    Turn a feasible point into a witness schedule.

    The point is scaled to integers, decomposed into simple cycles, the cycles are
    chained with shortest connectors inside the instance's subgraph, and a shortest
    prefix leads from the initial state to the first cycle.
    """
    order = _state_order(secured)
    positive = {edge: value for edge, value in point.assignment.items() if value > 0}
    if not positive:
        raise WitnessError(f"LP {lp.name} returned an all-zero point")
    scale = math.lcm(*(value.denominator for value in positive.values()))
    flow = {edge: int(value * scale) for edge, value in positive.items()}
    cycles = decompose_flow(flow, order)

    inner = nx.DiGraph()
    inner.add_edges_from(lp.edges)
    connectors = []
    for j, (cycle, _) in enumerate(cycles):
        following = cycles[(j + 1) % len(cycles)][0][0]
        try:
            path = nx.shortest_path(inner, cycle[0], following)
        except nx.NetworkXNoPath:
            raise WitnessError(f"No connector from {cycle[0]!r} to {following!r} in {lp.name}") from None
        connectors.append(tuple(path[:-1]))

    try:
        lead = nx.shortest_path(secured.graph(), secured.game.arena.initial, cycles[0][0][0])
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        raise WitnessError(f"Cycle start {cycles[0][0][0]!r} is not reachable from the initial state") from None
    return WitnessSchedule(tuple(lead[:-1]), tuple(cycles), tuple(connectors), lp.name)
