class QuantumPortfolioError(Exception):
    """
    Base class of all errors raised by this package.

    Every subclass also derives from the builtin exception it refines, so callers may catch either.
    """


class ParameterError(QuantumPortfolioError, ValueError):
    pass


class ShapeError(QuantumPortfolioError, ValueError):
    pass


class RangeError(QuantumPortfolioError, ValueError):
    pass


class InsufficientHistoryError(QuantumPortfolioError, ValueError):
    pass


class CapacityError(QuantumPortfolioError, ValueError):
    pass


class BindingError(QuantumPortfolioError, ValueError):
    pass


class ConfigurationError(QuantumPortfolioError, ValueError):
    pass


class EvaluationError(QuantumPortfolioError, ArithmeticError):
    """
    A cost function returned a value that is not finite.
    """

    def __init__(self, iteration: int, value):
        super().__init__("cost evaluation {} returned the non-finite value {}".format(iteration, value))
        self.iteration = iteration
        self.value = value


class DegenerateRunError(QuantumPortfolioError, RuntimeError):
    """
    A run finished but produced no usable result, e.g. every shot was discarded by post-selection.
    """

    def __init__(self, message: str, success_probability: float = 0.):
        super().__init__(message)
        self.success_probability = success_probability


class InstanceFileError(QuantumPortfolioError, ValueError):
    """
    An instance or result file could not be read. `path` names the offending location inside the document.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__("{}: {}".format(path, message) if path else message)
        self.path = path
