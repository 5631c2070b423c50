class BPClusterError(Exception):
    """Base class for library errors."""


class GraphError(BPClusterError, ValueError):
    pass


class TensorError(BPClusterError, ValueError):
    pass


class BudgetExceededError(BPClusterError):
    pass


class DegenerateFixedPointError(BPClusterError, ArithmeticError):
    """A vanishing overlap or local contribution at a BP fixed point."""


class NonFiniteMessageError(BPClusterError, FloatingPointError):
    pass


class BPNotConvergedError(BPClusterError):
    pass


class QuadratureError(BPClusterError):
    pass
