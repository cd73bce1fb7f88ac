"""Exception types raised by pivrpca."""


class FactorizationError(RuntimeError):
    """The SVD backend failed to converge."""

    def __init__(self, shape):
        self.shape = tuple(shape)
        super().__init__(f"SVD did not converge for matrix of shape {self.shape}")


class NumericalDivergenceError(FloatingPointError):
    """Non-finite values appeared in the solver iterates."""

    def __init__(self, iteration):
        self.iteration = iteration
        super().__init__(f"non-finite iterate at iteration {iteration}")


class SequenceIOError(OSError):
    """Base class for frame sequence loading failures."""


class EmptyInputError(SequenceIOError):
    pass


class UnreadableFrameError(SequenceIOError):
    pass


class DimensionMismatchError(SequenceIOError):
    pass
