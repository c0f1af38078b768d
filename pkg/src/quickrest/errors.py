"""Exception hierarchy shared by all quickrest modules."""


class QuickRestError(Exception):
    pass


class MalformedJson(QuickRestError):
    pass


class UnsupportedVersion(QuickRestError):
    pass


class InvalidModel(QuickRestError):
    """Raised when a parsed document breaks one or more model invariants.

    ``violations`` is a list of ``(json_pointer, message)`` pairs.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{ptr or '/'}: {msg}" for ptr, msg in self.violations)
        super().__init__(f"invalid OpenAPI document: {lines}")


class UnknownReference(QuickRestError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown definition reference {name!r}")


class CyclicReference(QuickRestError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cyclic reference: " + " -> ".join(self.cycle))


class UnsupportedType(QuickRestError):
    pass


class CollisionError(QuickRestError):
    pass


class UnknownSpec(QuickRestError):
    pass


class GenerationExhausted(QuickRestError):
    pass


class ShrinkBudgetExceeded(QuickRestError):
    """Shrinking hit its execution cap; ``best`` is the smallest failing value found."""

    def __init__(self, best, steps, accepted=0):
        self.best = best
        self.steps = steps
        self.accepted = accepted
        super().__init__(f"shrink budget exceeded after {steps} executions")


class MissingPathParameter(QuickRestError):
    pass


class UnsendableRequest(QuickRestError):
    pass


class UnresolvableReference(UnknownReference):
    pass
