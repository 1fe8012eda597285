"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates a structural contract (bad code, duplicate, malformed line)."""


class EndpointError(RuntimeError):
    """The language-model endpoint could not be reached or kept failing."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else []
