"""
Game, spec, scheme and support files, and the JSON documents the command line writes.

All files are JSON. Rationals travel as integers or "p/q" strings, never as decimals.

Game file::

    {
      "players": ["circle", "square"],
      "alphabet": ["collide"],                      # optional, inferred from labels
      "initial": "K0",
      "states": [
        {"id": "K0", "labels": [], "weights": {"circle": -1, "square": "-1/2"},
         "actions": {"circle": ["a", "b"], "square": ["go"]}}
      ],
      "transitions": [
        {"from": "K0", "profile": ["a", "*"], "to": "K1"}   # "*" = every action of that player
      ]
    }

Spec file: {"assumptions": ["..."], "guarantees": ["..."]}
Scheme file: {"entries": [{"player": "circle", "state": "K0", "amount": 1}]}; a verdict
document is accepted too and its certificate's scheme is read.
Support file: {"slots": [{"player": "circle", "state": "K0"}]}
"""
import itertools
import json
import logging
from datetime import datetime, timezone
from pathlib import Path

from solvers.errors import GameFormatError, UnknownPlayerError, UnknownSlotError
from solvers.game_model import Arena, ConcurrentGame, RewardScheme, format_rational
from solvers.gr1_spec import GR1Spec

logger = logging.getLogger(__name__)

TOOL_NAME = 'equidesign'
TOOL_VERSION = '1.0.0'
WILDCARD = '*'


def read_json(path):
    """Parse a JSON file, turning syntax errors into GameFormatError with the line."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise GameFormatError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    except OSError as e:
        raise GameFormatError(f"{path}: cannot read file: {e.strerror}") from None


def _field(document, name, path, kind=None):
    if not isinstance(document, dict) or name not in document:
        raise GameFormatError(f"{path}: missing field '{name}'")
    value = document[name]
    if kind is not None and not isinstance(value, kind):
        raise GameFormatError(f"{path}: field '{name}' must be a {kind.__name__}")
    return value


def _names(value, where, what):
    """A list of non-empty strings, or GameFormatError."""
    if not isinstance(value, list) or not all(isinstance(name, str) and name for name in value):
        raise GameFormatError(f"{where}: {what} must be a list of non-empty strings")
    return value


def parse_game(document, path='<game>'):
    """
    Build a ConcurrentGame from a decoded game document.

    Wildcards are expanded first and totality is checked afterwards, by the Arena.
    Two entries for the same (state, profile) are rejected even if they agree.
    """
    players = _names(_field(document, 'players', path), path, "'players'")
    initial = _field(document, 'initial', path, str)
    state_entries = _field(document, 'states', path, list)
    transition_entries = _field(document, 'transitions', path, list)

    states, labels, weights, actions = [], {}, {}, {}
    for position, entry in enumerate(state_entries):
        where = f"{path}: states[{position}]"
        state = _field(entry, 'id', where, str)
        states.append(state)
        labels[state] = set(_names(entry.get('labels', []), where, "'labels'"))
        state_weights = _field(entry, 'weights', where, dict)
        for player, value in state_weights.items():
            if player not in players:
                raise UnknownPlayerError(f"{where}: weight for unknown player {player!r}")
            weights[(player, state)] = value
        state_actions = _field(entry, 'actions', where, dict)
        for player, available in state_actions.items():
            if player not in players:
                raise UnknownPlayerError(f"{where}: actions for unknown player {player!r}")
            if WILDCARD in _names(available, where, f"actions of {player!r}"):
                raise GameFormatError(f"{where}: actions of {player!r} must be a list of names other than '*'")
            actions[(state, player)] = tuple(available)

    transitions = {}
    for position, entry in enumerate(transition_entries):
        where = f"{path}: transitions[{position}]"
        source = _field(entry, 'from', where, str)
        target = _field(entry, 'to', where, str)
        profile = _names(_field(entry, 'profile', where), where, "'profile'")
        if len(profile) != len(players):
            raise GameFormatError(f"{where}: profile needs one action per player ({len(players)})")
        choices = []
        for player, action in zip(players, profile):
            available = actions.get((source, player))
            if available is None:
                raise GameFormatError(f"{where}: state {source!r} declares no actions for {player!r}")
            if action == WILDCARD:
                choices.append(available)
            elif action in available:
                choices.append((action,))
            else:
                raise GameFormatError(f"{where}: {action!r} is not an action of {player!r} at {source!r}")
        for expanded in itertools.product(*choices):
            if (source, expanded) in transitions:
                raise GameFormatError(f"{where}: duplicate transition for {source!r} with {list(expanded)}")
            transitions[(source, expanded)] = target

    try:
        arena = Arena(tuple(players), tuple(states), initial, actions, transitions, labels,
                      frozenset(_names(document.get('alphabet', []), path, "'alphabet'")))
        return ConcurrentGame(arena, weights)
    except GameFormatError as e:
        raise GameFormatError(f"{path}: {e}") from None


def load_game(path):
    game = parse_game(read_json(path), str(path))
    logger.info(f"Loaded game {path}: {len(game.arena.players)} players, {len(game.arena.states)} states")
    return game


def parse_spec(document, path='<spec>'):
    assumptions = document.get('assumptions', []) if isinstance(document, dict) else None
    guarantees = document.get('guarantees', []) if isinstance(document, dict) else None
    if not isinstance(assumptions, list) or not isinstance(guarantees, list) \
            or not all(isinstance(formula, str) for formula in assumptions + guarantees):
        raise GameFormatError(f"{path}: 'assumptions' and 'guarantees' must be lists of formulas")
    return GR1Spec.from_strings(assumptions, guarantees)


def load_spec(path):
    return parse_spec(read_json(path), str(path))


def _slot(entry, where):
    if isinstance(entry, list) and len(entry) == 2:
        return tuple(_names(entry, where, 'a slot'))
    return _field(entry, 'player', where, str), _field(entry, 'state', where, str)


def parse_scheme(document, game=None, path='<scheme>'):
    """Read a scheme document, or the scheme inside a verdict document's certificate."""
    if isinstance(document, dict) and 'certificate' in document:
        certificate = document['certificate']
        if not isinstance(certificate, dict):
            raise GameFormatError(f"{path}: verdict carries no certificate")
        document = certificate.get('scheme', {})
    entries = _field(document, 'entries', path, list)
    rewards = {}
    for position, entry in enumerate(entries):
        where = f"{path}: entries[{position}]"
        slot = _slot(entry, where)
        if game is not None:
            _check_slot(game, slot, where)
        if slot in rewards:
            raise GameFormatError(f"{where}: duplicate entry for {slot}")
        rewards[slot] = _field(entry, 'amount', where)
    try:
        return RewardScheme.from_mapping(rewards)
    except GameFormatError as e:
        raise GameFormatError(f"{path}: {e}") from None


def load_scheme(path, game=None):
    return parse_scheme(read_json(path), game, str(path))


def _check_slot(game, slot, where):
    player, state = slot
    if player not in game.arena.players:
        raise UnknownPlayerError(f"{where}: unknown player {player!r}")
    if state not in game.arena.states:
        raise UnknownSlotError(f"{where}: unknown state {state!r}")


def parse_support(document, game, path='<support>'):
    slots = _field(document, 'slots', path, list)
    support = []
    for position, entry in enumerate(slots):
        where = f"{path}: slots[{position}]"
        slot = _slot(entry, where)
        _check_slot(game, slot, where)
        support.append(slot)
    return tuple(support)


def load_support(path, game):
    return parse_support(read_json(path), game, str(path))


def scheme_document(scheme):
    return {
        'entries': [{'player': player, 'state': state, 'amount': amount}
                    for (player, state), amount in scheme.entries],
        'cost': scheme.cost,
    }


def _rationals(mapping):
    return {str(key): format_rational(value) for key, value in mapping.items()}


def _configurations(configurations):
    return [{'state': state, 'profile': list(profile)} for state, profile in configurations]


def certificate_document(certificate):
    if certificate is None:
        return None
    welfare = _rationals(certificate.welfare)
    welfare['reading'] = certificate.reading
    if certificate.all_equilibria is not None:
        welfare['all_equilibria'] = certificate.all_equilibria
    return {
        'scheme': scheme_document(certificate.scheme),
        'z': _rationals(certificate.z),
        'witness': certificate.schedule.to_dict(),
        'lasso': {'prefix': _configurations(certificate.lasso.prefix),
                  'cycle': _configurations(certificate.lasso.cycle)},
        'payoffs': _rationals(certificate.payoffs),
        'welfare': welfare,
        'predicate': certificate.predicate,
    }


def verdict_document(command, verdict, query=None):
    document = {
        'command': command,
        'mode': verdict.mode,
        'answer': 'yes' if verdict.answer else 'no',
        'certificate': certificate_document(verdict.certificate),
        'violation': certificate_document(verdict.violation),
        'stats': dict(verdict.stats),
    }
    if query is not None:
        document['budget'] = query.budget
        if query.welfare is not None:
            document['welfare'] = {'measure': query.welfare.measure,
                                   'threshold': format_rational(query.welfare.threshold)}
    return document


def opt_document(command, mode, result):
    document = {
        'command': command,
        'mode': mode,
        'answer': 'yes' if result.optimum is not None else 'no',
        'optimum': result.optimum,
        'scheme': scheme_document(result.scheme) if result.scheme is not None else None,
        'certificate': certificate_document(result.verdict.certificate) if result.verdict else None,
    }
    if result.unique is not None:
        document['unique'] = result.unique
        document['schemes'] = [scheme_document(scheme) for scheme in result.schemes]
    return document


def punishment_document(game, table):
    players = game.arena.players
    return {
        'command': 'punish',
        'values': {player: {state: format_rational(table.value(player, state)) for state in game.arena.states}
                   for player in players},
        'strategies': {player: {state: list(table.strategy(player, state)) for state in game.arena.states}
                       for player in players},
    }


def add_meta(document, config_path):
    document['meta'] = {
        'tool': TOOL_NAME,
        'version': TOOL_VERSION,
        'timestamp': datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ'),
        'config': config_path,
    }
    return document


def dumps(document, indent=2):
    return json.dumps(document, indent=indent, ensure_ascii=False) + '\n'


def write_json(path, document, indent=2):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(dumps(document, indent))
    logger.info(f"Wrote {path}")


def lp_dump_sink(directory):
    """A callable that writes each LP instance it receives to its own numbered text file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    counter = itertools.count(1)

    def sink(lp):
        name = ''.join(ch if ch.isalnum() else '_' for ch in lp.name).strip('_')
        target = directory / f"lp_{next(counter):05d}_{name}.txt"
        target.write_text(lp.dump(), encoding='utf-8')

    return sink
