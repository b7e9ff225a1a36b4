"""Exception types shared across the package."""


class ShapeError(ValueError):
    pass


class ModeError(ValueError):
    """A jet does not carry the derivative channels an operator needs."""


class NumericError(ArithmeticError):
    def __init__(self, term, message=None):
        self.term = term
        super().__init__(message or f"non-finite value in {term!r}")


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None, task=None):
        self.epoch = epoch
        self.task = task
        super().__init__(message)


class ConfigError(ValueError):
    pass


class CompatibilityError(ValueError):
    pass
