"""A digital object repository: versioned, audited, XML-encoded objects
whose behaviors are mediated through external services."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AuditAction,
    AuditRecord,
    ControlGroup,
    Datastream,
    DatastreamVersion,
    DigitalObject,
    Disseminator,
    DisseminatorVersion,
    Dissemination,
    ObjectKind,
    Pid,
)
