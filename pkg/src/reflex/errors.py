class RejectedInput(ValueError):
    """Input violates an operation's precondition."""


class NumericalFault(ArithmeticError):
    """A non-finite value appeared mid-computation (episode-level fault)."""
