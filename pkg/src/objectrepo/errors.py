"""Error taxonomy shared by every subsystem.

Each exception carries a stable machine-readable ``code`` so transport
layers (HTTP, CLI) can map failures one-to-one without string matching.
"""

from __future__ import annotations


class RepositoryError(Exception):
    """Base class for all repository failures."""

    code = "INTERNAL"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


class InvalidObject(RepositoryError):
    """A digital object value violates a model invariant."""

    code = "INVALID_OBJECT"


class ParseError(RepositoryError):
    """Input is not well-formed XML (distinct from structural violations)."""

    code = "PARSE_ERROR"


class StructuralError(RepositoryError):
    """A document failed structural validation against the METS profile."""

    code = "STRUCTURAL_ERROR"

    def __init__(self, violations, message: str = ""):
        self.violations = list(violations)
        detail = "; ".join(str(v) for v in self.violations)
        super().__init__(message or f"structural validation failed: {detail}")


class IntegrityError(RepositoryError):
    """An operation would break repository integrity rules.

    ``violations`` holds IntegrityViolation values from the closed rule set
    when raised by the validation module; management operations may also
    raise it with a single MODEL_INVARIANT violation for per-field failures.
    """

    code = "INTEGRITY_ERROR"

    def __init__(self, violations, message: str = ""):
        self.violations = list(violations)
        detail = "; ".join(str(v) for v in self.violations)
        super().__init__(message or f"integrity validation failed: {detail}")


class ObjectNotFound(RepositoryError):
    code = "OBJECT_NOT_FOUND"


class ComponentNotFound(RepositoryError):
    code = "COMPONENT_NOT_FOUND"


class DuplicateComponent(RepositoryError):
    code = "DUPLICATE_COMPONENT"


class ContentNotFound(RepositoryError):
    code = "CONTENT_NOT_FOUND"


class NoVersionAtTime(RepositoryError):
    """No component version existed at the requested point in time."""

    code = "NO_VERSION_AT_TIME"


class NoSuchSubscription(RepositoryError):
    """The object has no disseminator for the requested behavior definition."""

    code = "NO_SUCH_SUBSCRIPTION"


class NoSuchMethod(RepositoryError):
    code = "NO_SUCH_METHOD"


class MissingBindingKey(RepositoryError):
    code = "MISSING_BINDING_KEY"

    def __init__(self, key: str):
        super().__init__(f"no value supplied for binding key {key}")
        self.key = key


class MissingRequiredParam(RepositoryError):
    code = "MISSING_REQUIRED_PARAM"

    def __init__(self, name: str):
        super().__init__(f"required parameter {name} not supplied")
        self.name = name


class BindingIntegrityError(RepositoryError):
    """Mechanism/definition wiring broke down during dissemination."""

    code = "BINDING_INTEGRITY"


class DescriptorError(RepositoryError):
    """A service descriptor document is malformed or unsupported."""

    code = "DESCRIPTOR_ERROR"

    def __init__(self, message: str, locator: str = ""):
        super().__init__(f"{locator}: {message}" if locator else message)
        self.locator = locator


class ExternalFetchError(RepositoryError):
    """An external content source or service could not be read.

    The upstream URL is kept out of the message on purpose: messages
    travel to API clients, which must never see mechanism endpoints.
    """

    code = "EXTERNAL_FETCH"

    def __init__(self, status: int | None = None, timeout: bool = False,
                 detail: str = ""):
        if timeout:
            message = "upstream request timed out"
        elif status is not None:
            message = f"upstream returned status {status}"
        else:
            message = detail or "upstream request failed"
        super().__init__(message)
        self.status = status
        self.timeout = timeout


class PidCollision(RepositoryError):
    code = "PID_COLLISION"


class InUseError(RepositoryError):
    """Purge refused: other objects still reference this one."""

    code = "IN_USE"

    def __init__(self, dependents):
        self.dependents = sorted(dependents)
        super().__init__("object is referenced by " + ", ".join(self.dependents))


class ClockSkew(RepositoryError):
    """Second mutation of a component within one second; retry later."""

    code = "CLOCK_SKEW"


class StorageError(RepositoryError):
    code = "STORAGE_ERROR"
