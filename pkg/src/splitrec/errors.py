"""Exception types shared across modules."""


class ModelViolation(ValueError):
    """A sampler produced something that is not a probability vector."""


class CapabilityError(RuntimeError):
    """The requested method needs something the model does not provide."""


class ConvergenceError(RuntimeError):
    """A numerical procedure could not reach the requested tolerance."""
