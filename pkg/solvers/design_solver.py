import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from solvers.errors import (
    BudgetError,
    EquiDesignError,
    GameFormatError,
    ResourceLimitError,
    UnknownPlayerError,
    UnknownSlotError,
    WitnessError,
)
from solvers.game_model import (
    RewardScheme,
    apply_scheme,
    budget_upper_bound,
    enumerate_schemes,
    parse_rational,
    scheme_count,
    weak_compositions,
)
from solvers.gr1_spec import holds_on_lasso
from solvers.lp_solver import (
    build_assumption_lp,
    build_free_lp,
    build_guarantee_lp,
    build_negspec_lp,
    extract_witness,
    feasible,
    scc_reachable,
    split_component,
)
from solvers.punishment_solver import (
    build_secured,
    is_z_secure,
    pun_value_set,
    punishment_table,
)

logger = logging.getLogger(__name__)

WEAK = 'weak'
STRONG = 'strong'
MODES = (WEAK, STRONG)

ANY = 'any'
SAT = 'sat'
VIOL = 'viol'

USW = 'usw'
ESW = 'esw'

# Welfare constraints bind the witnessing equilibrium; whether every equilibrium meets
# the threshold is reported next to it.
WELFARE_READING = 'witness'


@dataclass(frozen=True)
class Welfare:
    """A social-welfare threshold: usw (sum of payoffs) or esw (minimum payoff) ≥ threshold."""
    measure: str
    threshold: Fraction

    def __post_init__(self):
        if self.measure not in (USW, ESW):
            raise GameFormatError(f"Welfare measure must be 'usw' or 'esw', got {self.measure!r}")
        object.__setattr__(self, 'threshold', parse_rational(self.threshold))


@dataclass(frozen=True, eq=False)
class Query:
    """
    One equilibrium design question.

    `support` lists the (player, state) slots that may carry rewards; it defaults to
    every slot of the game, player-major.
    """
    game: object
    spec: object
    budget: int
    mode: str = WEAK
    support: tuple = None
    welfare: Welfare = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise GameFormatError(f"Mode must be 'weak' or 'strong', got {self.mode!r}")
        if isinstance(self.budget, bool) or not isinstance(self.budget, int) or self.budget < 0:
            raise BudgetError(f"Budget must be a natural number, got {self.budget!r}")
        if self.support is None:
            support = tuple(self.game.slots())
        else:
            support = tuple(tuple(slot) for slot in self.support)
            for player, state in support:
                if player not in self.game.arena.players:
                    raise UnknownPlayerError(f"Support mentions unknown player {player!r}")
                if state not in self.game.arena.states:
                    raise UnknownSlotError(f"Support mentions unknown state {state!r}")
            if len(set(support)) != len(support):
                raise GameFormatError("Duplicate slots in support")
        object.__setattr__(self, 'support', support)
        self.spec.bind(self.game)

    def with_budget(self, budget):
        return Query(self.game, self.spec, budget, self.mode, self.support, self.welfare)


@dataclass(frozen=True)
class SolverSettings:
    max_verify_calls: int = 10_000_000
    value_iteration_start: int = 8
    lp_sink: object = None

    @classmethod
    def from_config(cls, config, lp_sink=None):
        solver = (config or {}).get('solver', {}) or {}
        return cls(int(solver.get('max_verify_calls', cls.max_verify_calls)),
                   int(solver.get('value_iteration_start', cls.value_iteration_start)),
                   lp_sink)


@dataclass
class SearchStats:
    schemes: int = 0
    z_vectors: int = 0
    lps: int = 0

    def to_dict(self):
        return {'schemes_examined': self.schemes, 'z_vectors_examined': self.z_vectors, 'lps_solved': self.lps}


@dataclass(frozen=True, eq=False)
class NEWitness:
    """A punishment vector z and a schedule inside G[z] whose payoffs reach z."""
    z: dict
    secured: object
    schedule: object
    predicate: str


@dataclass(frozen=True, eq=False)
class Certificate:
    scheme: RewardScheme
    z: dict
    schedule: object
    lasso: object
    payoffs: dict
    welfare: dict
    predicate: str
    reading: str = WELFARE_READING
    all_equilibria: bool = None


@dataclass(frozen=True, eq=False)
class Verdict:
    """
    The answer to a query. A yes carries a certificate; a strong-mode no may carry the
    equilibrium that violates the specification under the first scheme examined.
    """
    answer: bool
    mode: str
    certificate: Certificate = None
    violation: Certificate = None
    stats: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class OptResult:
    optimum: int = None
    scheme: RewardScheme = None
    verdict: Verdict = None
    unique: bool = None
    schemes: tuple = ()


def shifted_weights(game, z, welfare=None):
    """
    The weight maps of the Eq3 rows for punishment vector z.

    Every player gets w_i − z_i (w_i − max(z_i, t) under an esw threshold); a usw
    threshold adds one more row Σ_i w_i − t.
    """
    rows = []
    for player in game.arena.players:
        bound = z[player]
        if welfare is not None and welfare.measure == ESW:
            bound = max(bound, welfare.threshold)
        rows.append((player, {state: game.weight(player, state) - bound for state in game.arena.states}))
    if welfare is not None and welfare.measure == USW:
        rows.append((USW, {state: sum(game.weight(player, state) for player in game.arena.players) - welfare.threshold
                           for state in game.arena.states}))
    return rows


def _instances(component, predicate, spec, game, shifted, secured):
    """Candidate LP instances for one SCC, in the order they are tried."""
    if predicate == ANY:
        yield build_free_lp(component, shifted)
        return
    psi_sets = spec.assumption_sets(game)
    theta_sets = spec.guarantee_sets(game)
    if predicate == SAT:
        yield build_guarantee_lp(component, shifted, theta_sets)
        for l, psi in enumerate(psi_sets, 1):
            for piece in split_component(component, psi, secured):
                yield build_assumption_lp(piece, shifted, psi, name=f"assumption[psi{l}]")
    elif predicate == VIOL:
        for r, theta in enumerate(theta_sets, 1):
            for piece in split_component(component, theta, secured):
                yield build_negspec_lp(piece, shifted, psi_sets, theta, name=f"negspec[theta{r}]")
    else:
        raise ValueError(f"Unknown predicate {predicate!r}")


def ne_witness_exists(game, predicate=ANY, spec=None, welfare=None, table=None, settings=None, stats=None):
    """
    Search for a Nash equilibrium path of `game` with the given property.

    Parameters:
    -----------
    game : ConcurrentGame
        The game with any reward scheme already applied.
    predicate : str
        'any' (no spec condition), 'sat' (path satisfies spec) or 'viol' (path violates it).
    spec : GR1Spec, optional
        Needed for 'sat' and 'viol'.
    welfare : Welfare, optional
        Extra threshold imposed on the path's payoffs.
    table : PunishmentTable, optional
        Precomputed punishment values of `game`.

    Returns:
    --------
    NEWitness or None
        The first witness in canonical order of z-vectors, SCCs and instances.
    """
    settings = settings or SolverSettings()
    stats = stats if stats is not None else SearchStats()
    if table is None:
        table = punishment_table(game, start_rounds=settings.value_iteration_start)
    players = game.arena.players
    value_sets = [pun_value_set(table, player) for player in players]

    for values in itertools.product(*value_sets):
        z = dict(zip(players, values))
        stats.z_vectors += 1
        secured = build_secured(game, table, z)
        if secured.is_empty:
            continue
        shifted = shifted_weights(game, z, welfare)
        for component in scc_reachable(secured):
            for lp in _instances(component, predicate, spec, game, shifted, secured):
                if settings.lp_sink is not None:
                    settings.lp_sink(lp)
                stats.lps += 1
                point = feasible(lp)
                if point is not None:
                    schedule = extract_witness(point, lp, secured)
                    logger.debug(f"Witness for {predicate} at z={_show(z)} from {lp.name}")
                    return NEWitness(z, secured, schedule, predicate)
    return None


def below_threshold_equilibrium(game, welfare, table=None, settings=None, stats=None):
    """
    Search for a Nash equilibrium path whose welfare is strictly below the threshold.

    None means every equilibrium of `game` meets the threshold. The strict inequality
    becomes (t − W)·x ≥ 1 on the cycle flow.
    """
    settings = settings or SolverSettings()
    stats = stats if stats is not None else SearchStats()
    if table is None:
        table = punishment_table(game, start_rounds=settings.value_iteration_start)
    players = game.arena.players
    states = game.arena.states
    if welfare.measure == USW:
        below = [(USW, {s: welfare.threshold - sum(game.weight(p, s) for p in players) for s in states}, 1)]
    else:
        below = [(f"{ESW}[{p}]", {s: welfare.threshold - game.weight(p, s) for s in states}, 1) for p in players]

    for values in itertools.product(*(pun_value_set(table, player) for player in players)):
        z = dict(zip(players, values))
        stats.z_vectors += 1
        secured = build_secured(game, table, z)
        if secured.is_empty:
            continue
        shifted = shifted_weights(game, z)
        for component in scc_reachable(secured):
            for row in below:
                lp = build_free_lp(component, shifted + [row], name=f"below[{row[0]}]")
                if settings.lp_sink is not None:
                    settings.lp_sink(lp)
                stats.lps += 1
                point = feasible(lp)
                if point is not None:
                    schedule = extract_witness(point, lp, secured)
                    logger.debug(f"Equilibrium below {welfare.measure} {welfare.threshold} at z={_show(z)}")
                    return NEWitness(z, secured, schedule, ANY)
    return None


def _show(z):
    return '{' + ', '.join(f"{player}: {value}" for player, value in z.items()) + '}'


def _certificate(scheme, rewarded, found, all_equilibria=None):
    players = rewarded.arena.players
    payoffs = {player: found.schedule.mean_payoff(rewarded.weight_map(player)) for player in players}
    lasso = found.schedule.to_lasso(found.secured)
    welfare = {USW: sum(payoffs.values(), Fraction(0)), ESW: min(payoffs.values())}
    return Certificate(scheme, dict(found.z), found.schedule, lasso, payoffs, welfare, found.predicate,
                       all_equilibria=all_equilibria)


def _check_scheme(query, scheme):
    if scheme.cost > query.budget:
        raise BudgetError(f"Scheme costs {scheme.cost}, above the budget {query.budget}")
    support = set(query.support)
    for slot, _ in scheme.entries:
        if slot not in support:
            raise UnknownSlotError(f"Scheme rewards {slot}, which is outside the support")


def _meets_everywhere(query, rewarded, search):
    if query.welfare is None:
        return None
    below = below_threshold_equilibrium(rewarded, query.welfare, search['table'], search['settings'],
                                        search['stats'])
    return below is None


def _decide(query, scheme, settings, stats):
    """Decide one scheme; returns (answer, certificate, violation)."""
    rewarded = apply_scheme(query.game, scheme)
    table = punishment_table(rewarded, start_rounds=settings.value_iteration_start)
    search = dict(spec=query.spec, welfare=query.welfare, table=table, settings=settings, stats=stats)

    if query.mode == WEAK:
        found = ne_witness_exists(rewarded, SAT, **search)
        if found is None:
            return False, None, None
        return True, _certificate(scheme, rewarded, found, _meets_everywhere(query, rewarded, search)), None

    found = ne_witness_exists(rewarded, SAT, **search) or ne_witness_exists(rewarded, ANY, **search)
    if found is None:
        return False, None, None
    # under a welfare threshold only the equilibria meeting it have to satisfy the spec
    bad = ne_witness_exists(rewarded, VIOL, **search)
    if bad is not None:
        return False, None, _certificate(scheme, rewarded, bad)
    return True, _certificate(scheme, rewarded, found, _meets_everywhere(query, rewarded, search)), None


def verify_scheme(query, scheme, settings=None, stats=None):
    """
    Is `scheme` in the weak (some equilibrium satisfies the spec) or strong (equilibria
    exist and all satisfy it) implementation set of the query?
    """
    settings = settings or SolverSettings()
    stats = stats if stats is not None else SearchStats()
    _check_scheme(query, scheme)
    stats.schemes += 1
    answer, certificate, violation = _decide(query, scheme, settings, stats)
    verdict = Verdict(answer, query.mode, certificate, violation, stats.to_dict())
    if answer and not replay_certificate(query, verdict, settings):
        raise WitnessError(f"Certificate for {scheme.rewards} failed revalidation")
    return verdict


def _cap(count, settings):
    if count > settings.max_verify_calls:
        raise ResourceLimitError(f"Search needs up to {count} scheme verifications, "
                                 f"above the cap of {settings.max_verify_calls}")


def _search_size(query):
    if not query.support:
        return 1
    return scheme_count(len(query.support), query.budget)


def check(query, settings=None):
    """
    Search the reward schemes of the query in canonical order and return the first one
    that implements the spec, with its certificate.

    Raises ResourceLimitError when the number of schemes exceeds the configured cap.
    """
    settings = settings or SolverSettings()
    _cap(_search_size(query), settings)
    stats = SearchStats()
    logger.info(f"{query.mode} check, budget {query.budget}, {len(query.support)} slots, "
                f"{_search_size(query)} schemes at most")

    violation = None
    schemes = enumerate_schemes(query.support, query.budget) if query.support else [RewardScheme()]
    for scheme in schemes:
        stats.schemes += 1
        answer, certificate, bad = _decide(query, scheme, settings, stats)
        if violation is None and bad is not None:
            violation = bad
        if answer:
            verdict = Verdict(True, query.mode, certificate, None, stats.to_dict())
            if not replay_certificate(query, verdict, settings):
                raise WitnessError(f"Certificate for {scheme.rewards} failed revalidation")
            logger.info(f"Answer yes with a scheme of cost {scheme.cost} after {stats.schemes} schemes")
            return verdict
    logger.info(f"Answer no after {stats.schemes} schemes")
    return Verdict(False, query.mode, None, violation, stats.to_dict())


def check_threshold(query, settings=None):
    """check() for a query that carries a usw or esw welfare threshold."""
    if query.welfare is None:
        raise GameFormatError("A threshold query needs a welfare measure and threshold")
    return check(query, settings)


def welfare_allowance(game, welfare):
    """
    Extra budget that lifts every path over a welfare threshold.

    Adding c to a player's weight at every state shifts all of that player's mean payoffs
    and punishment values by c, so the equilibria are unchanged. Under usw one player
    takes ⌈max(0, t − min_s Σ_i w_i(s))⌉ per state; under esw every player i takes
    ⌈max(0, t − min_s w_i(s))⌉ per state.
    """
    if welfare is None:
        return 0
    arena = game.arena
    t = welfare.threshold
    if welfare.measure == USW:
        lowest = min(sum(game.weight(p, s) for p in arena.players) for s in arena.states)
        per_state = math.ceil(max(Fraction(0), t - lowest))
    else:
        per_state = sum(math.ceil(max(Fraction(0), t - min(game.weight(p, s) for s in arena.states)))
                        for p in arena.players)
    return per_state * len(arena.states)


def opt(game, spec, mode=WEAK, support=None, welfare=None, settings=None):
    """
    Least budget whose check answers yes, by binary search up to budget_upper_bound
    plus the welfare_allowance of the threshold.

    Returns:
    --------
    OptResult
        optimum and a scheme of exactly that cost; optimum is None when even the upper
        bound fails.
    """
    settings = settings or SolverSettings()
    base = Query(game, spec, 0, mode, support, welfare)
    upper = budget_upper_bound(game, punishment_table(game, start_rounds=settings.value_iteration_start))
    upper += welfare_allowance(game, welfare)
    logger.info(f"Optimum search for {mode} implementation over budgets 0..{upper}")

    best = check(base.with_budget(upper), settings)
    if not best.answer:
        return OptResult()
    low, high = 0, upper
    while low < high:
        middle = (low + high) // 2
        verdict = check(base.with_budget(middle), settings)
        if verdict.answer:
            high, best = middle, verdict
        else:
            low = middle + 1
    scheme = best.certificate.scheme
    if scheme.cost != high:
        raise WitnessError(f"Optimal budget {high} but the first scheme found costs {scheme.cost}")
    return OptResult(high, scheme, best)


def exact(game, spec, mode, budget, support=None, welfare=None, settings=None):
    """True iff `budget` is exactly the optimum: yes at budget and no at budget − 1."""
    if isinstance(budget, bool) or not isinstance(budget, int) or budget < 0:
        raise BudgetError(f"Budget must be a natural number, got {budget!r}")
    settings = settings or SolverSettings()
    query = Query(game, spec, budget, mode, support, welfare)
    if not check(query, settings).answer:
        return False
    if budget == 0:
        return True
    return not check(query.with_budget(budget - 1), settings).answer


def uopt(game, spec, mode=WEAK, support=None, welfare=None, settings=None):
    """
    Is the optimal scheme unique? Every scheme of exactly the optimum cost is verified.

    Returns:
    --------
    OptResult
        With `unique` set and `schemes` holding every optimal scheme; empty when no
        optimum exists.
    """
    settings = settings or SolverSettings()
    result = opt(game, spec, mode, support, welfare, settings)
    if result.optimum is None:
        return result
    query = Query(game, spec, result.optimum, mode, support, welfare)
    slots = list(query.support)
    if slots:
        _cap(math.comb(result.optimum + len(slots) - 1, result.optimum), settings)
        candidates = (RewardScheme(tuple((slot, amount) for slot, amount in zip(slots, amounts) if amount))
                      for amounts in weak_compositions(result.optimum, len(slots)))
    else:
        candidates = [RewardScheme()]
    winners = tuple(scheme for scheme in candidates if verify_scheme(query, scheme, settings).answer)
    logger.info(f"{len(winners)} optimal scheme(s) of cost {result.optimum}")
    return OptResult(result.optimum, result.scheme, result.verdict, len(winners) == 1, winners)


def is_efficient(query, scheme, settings=None):
    """A scheme is efficient when it implements the spec and costs exactly the optimum."""
    settings = settings or SolverSettings()
    if not verify_scheme(query, scheme, settings).answer:
        return False
    result = opt(query.game, query.spec, query.mode, query.support, query.welfare, settings)
    return result.optimum == scheme.cost


def certificate_problems(query, certificate, settings=None):
    """
    Independently recheck a certificate; returns the list of failed conditions.

    Checks the cost, the punishment vector, that the witness replays as a lasso inside
    the secured arena, z-security of every configuration, payoffs against z, welfare
    and the spec on the lasso.
    """
    settings = settings or SolverSettings()
    problems = []
    scheme = certificate.scheme
    if scheme.cost > query.budget:
        problems.append(f"cost {scheme.cost} exceeds budget {query.budget}")
    if any(slot not in set(query.support) for slot, _ in scheme.entries):
        problems.append("scheme rewards slots outside the support")

    rewarded = apply_scheme(query.game, scheme)
    table = punishment_table(rewarded, start_rounds=settings.value_iteration_start)
    players = rewarded.arena.players
    z = certificate.z
    for player in players:
        if z.get(player) not in pun_value_set(table, player):
            problems.append(f"z for {player} is not a punishment value")
    if problems:
        return problems

    secured = build_secured(rewarded, table, z)
    try:
        lasso = certificate.schedule.to_lasso(secured)
    except EquiDesignError as error:
        return problems + [f"witness does not replay inside G[z]: {error}"]

    initial = rewarded.arena.initial
    for state, profile in lasso.prefix + lasso.cycle:
        for player in players:
            if not is_z_secure(rewarded, table, state, profile, player, z[player]):
                problems.append(f"configuration {state} {profile} is not secure for {player}")
            if state != initial and table.value(player, state) > z[player]:
                problems.append(f"state {state} has punishment value above z for {player}")

    payoffs = {player: certificate.schedule.mean_payoff(rewarded.weight_map(player)) for player in players}
    for player in players:
        if payoffs[player] < z[player]:
            problems.append(f"payoff of {player} is below z")
        if payoffs[player] != certificate.payoffs.get(player):
            problems.append(f"reported payoff of {player} does not match the witness")

    if query.welfare is not None:
        value = sum(payoffs.values(), Fraction(0)) if query.welfare.measure == USW else min(payoffs.values())
        if value < query.welfare.threshold:
            problems.append(f"{query.welfare.measure} {value} is below {query.welfare.threshold}")

    if set(lasso.cycle_states()) != certificate.schedule.recurring_states():
        problems.append("lasso cycle and schedule disagree on recurring states")
    if certificate.predicate == SAT and not holds_on_lasso(query.spec, rewarded, lasso):
        problems.append("spec does not hold on the witness")
    return problems


def replay_certificate(query, verdict, settings=None):
    """True iff a yes-verdict's certificate passes every independent check."""
    if not verdict.answer or verdict.certificate is None:
        return False
    problems = certificate_problems(query, verdict.certificate, settings)
    for problem in problems:
        logger.error(f"Certificate replay: {problem}")
    return not problems
