"""Exception hierarchy shared by all modules."""


class InterplabError(Exception):
    pass


class DimensionMismatch(InterplabError, ValueError):
    pass


class SingularMatrix(InterplabError, ArithmeticError):
    pass


class NonFiniteLoss(InterplabError, ArithmeticError):
    pass


class InvalidSpec(InterplabError, ValueError):
    pass


class InvalidConfig(InterplabError, ValueError):
    pass


class Exhausted(InterplabError, RuntimeError):
    """A sampler hit ``max_iterations`` without reaching the loss threshold."""

    def __init__(self, max_iterations, best_loss=float("nan")):
        self.max_iterations = max_iterations
        self.best_loss = best_loss
        super().__init__(
            f"no success within {max_iterations} iterations (best loss {best_loss:.6g})"
        )


class StepUnderflow(InterplabError, RuntimeError):
    pass


class WidthCondition(InterplabError, ValueError):
    """Teacher/student widths violate a bound's preconditions."""

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("width condition violated: " + "; ".join(self.failed))


class DepthMismatch(InterplabError, ValueError):
    pass


class BoxOverflow(InterplabError, ValueError):
    pass


class TooFewPoints(InterplabError, ValueError):
    pass


class NoSuccessfulTrials(InterplabError, RuntimeError):
    pass
