"""Exception and warning types shared across the package."""


class TaskAlgError(Exception):
    """Base class for all package errors."""


class InvalidEnvironment(TaskAlgError):
    """Environment description is malformed (bad bounds, empty labels, ...)."""


class EnvironmentDisconnected(TaskAlgError):
    """No finite constrained path length exists between any pair of regions."""


class ParseError(TaskAlgError):
    """Formula text could not be parsed.

    Carries the byte offset of the offending token in ``offset``.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class IncompatibleTables(TaskAlgError):
    """Tables disagree on grid shape, region layout, action order or penalty config."""


class MissingTask(TaskAlgError):
    """A composition referenced a task key that is not in the library."""

    def __init__(self, key: str):
        super().__init__(f"task {key!r} not present in library")
        self.key = key


class NegationUnavailable(TaskAlgError):
    """Negation of a non-literal was requested under prioritized-safety semantics."""


class SubsetExplosion(TaskAlgError):
    """Safety-extended training would enumerate more region subsets than allowed."""


class ExplosionGuard(TaskAlgError):
    """Brute-force enumeration exceeded its node budget."""


class OracleTimeout(TaskAlgError):
    """An oracle query exceeded its node budget."""


class SemanticallyEmptyWarning(UserWarning):
    """A formula has no satisfying region in the given environment."""


class ConflictingLiteralsWarning(UserWarning):
    """A conjunct requires and forbids the same proposition."""


class AssumptionViolatedWarning(UserWarning):
    """More than one independently learned negated table entered a composition."""
