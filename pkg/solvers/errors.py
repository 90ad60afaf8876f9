"""Exception hierarchy shared by the solver modules and the command line front end."""


class EquiDesignError(Exception):
    """Base class for every error raised on purpose by equidesign."""

    exit_code = 2


class GameFormatError(EquiDesignError):
    """A game, spec, scheme or support document is malformed."""


class UnknownPlayerError(EquiDesignError):
    """A player id that the game does not declare."""


class UnknownSlotError(EquiDesignError):
    """A (player, state) slot that the game does not declare."""


class LassoError(EquiDesignError):
    """A lasso does not follow the transition function of its arena."""


class FormulaSyntaxError(EquiDesignError):
    """A Boolean formula could not be parsed."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnboundAtomError(EquiDesignError):
    """A formula mentions an atom outside the arena's alphabet."""


class BudgetError(EquiDesignError):
    """Budget or counting arguments out of range, or a scheme above budget."""


class SizeGuardError(EquiDesignError):
    """An oracle was handed an instance bigger than its size guard."""


class ResourceLimitError(EquiDesignError):
    """The search space is larger than the configured verify-call cap."""

    exit_code = 3


class DeadEndError(EquiDesignError):
    """A graph node without successors where every node needs one."""

    exit_code = 4


class WitnessError(EquiDesignError):
    """A feasible point could not be turned into a witness (internal invariant)."""

    exit_code = 4
