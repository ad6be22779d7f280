"""Exception hierarchy shared across the pipeline."""


class ExpirankError(Exception):
    """Base class for all package errors."""


class ConfigError(ExpirankError):
    """Invalid or unknown configuration."""


class CorpusFormatError(ExpirankError):
    """Corpus records failed to load; carries itemized per-line errors."""

    def __init__(self, items: list[str]):
        self.items = list(items)
        super().__init__("; ".join(self.items) or "corpus format error")


class NoEvidenceError(ExpirankError):
    """No focused chunks available to reason over."""


class NoVerdictError(ExpirankError):
    """The reasoning backend reached no conclusion."""


class BackendError(ExpirankError):
    """Base for reasoning-backend failures."""


class BackendTimeoutError(BackendError):
    """Backend call exceeded its deadline (after any configured retry)."""


class BackendSchemaError(BackendError):
    """Backend response failed structured-output validation."""


class UnsupportedVerdictError(ExpirankError):
    """Evidence fusion found zero support for every candidate."""
