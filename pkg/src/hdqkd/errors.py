"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where a formula is defined."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its stated accuracy."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
