"""Exception types shared across the package."""


class DelaynetsError(Exception):
    """Base class for package-specific failures."""


class OutOfRangeError(DelaynetsError, ValueError):
    """History lookup outside the buffer span.

    Carries the query time and the covered span so the message can name both.
    """

    def __init__(self, t_query: float, span: tuple[float, float]):
        self.t_query = t_query
        self.span = span
        super().__init__(
            f"history query t={t_query!r} outside buffer span "
            f"[{span[0]!r}, {span[1]!r}]"
        )


class NumericBlowupError(DelaynetsError, ArithmeticError):
    """The right-hand side produced non-finite values."""

    def __init__(self, t: float, state):
        self.t = t
        self.state = state
        super().__init__(f"non-finite state or derivative at t={t!r}")


class ParameterError(DelaynetsError, ValueError):
    """A scalar or vector argument violates its documented precondition."""


class EvaluationError(DelaynetsError, ArithmeticError):
    """A user-supplied evaluator returned non-finite or misshaped values."""


class ConfigError(DelaynetsError, ValueError):
    """Experiment configuration rejected; collects field-level messages."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
