"""Domain types for digital objects and the pure logic shared by all subsystems.

Everything here is an immutable value; mutation is modeled by producing a
new object (see :func:`append_audit`). Nothing in this module touches disk
or network.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Iterator, Mapping, Sequence, Union

from .errors import InvalidObject, NoVersionAtTime

NAMESPACE_RE = re.compile(r"^[a-z][a-z0-9-]{0,31}$")
SERIAL_RE = re.compile(r"^(0|[1-9][0-9]*)$")
COMPONENT_ID_RE = re.compile(r"^[A-Z][A-Z0-9._-]*$")
BINDING_KEY_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")
AUDIT_ID_RE = re.compile(r"^audit([1-9][0-9]*)$")

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"

# Reserved datastream ids carrying service descriptors in surrogate objects.
METHOD_MAP_DS = "METHODMAP"
SERVICE_BINDINGS_DS = "SERVICEBINDINGS"

# Document-level ids the METS encoding claims for itself.
RESERVED_DOC_IDS = frozenset({"DATASTREAMS", "AUDITTRAIL"})

_XML_CHAR_RANGES = (
    (0x09, 0x0A), (0x0D, 0x0D), (0x20, 0xD7FF),
    (0xE000, 0xFFFD), (0x10000, 0x10FFFF),
)


def is_xml_text(value: str) -> bool:
    """True if every character is storable in XML 1.0."""
    return all(any(lo <= ord(c) <= hi for lo, hi in _XML_CHAR_RANGES) for c in value)


def parse_timestamp(value: str) -> datetime:
    """Parse the repository timestamp form YYYY-MM-DDThh:mm:ss as UTC.

    Raises ValueError for anything else, including zone suffixes and
    sub-second precision.
    """
    dt = datetime.strptime(value, TIMESTAMP_FORMAT)
    return dt.replace(tzinfo=timezone.utc)


def format_timestamp(dt: datetime) -> str:
    if dt.tzinfo is None or dt.utcoffset() != timezone.utc.utcoffset(None):
        raise ValueError(f"timestamp must be UTC-aware: {dt!r}")
    if dt.microsecond:
        raise ValueError(f"timestamp must have second resolution: {dt!r}")
    return dt.strftime(TIMESTAMP_FORMAT)


def utc_now() -> datetime:
    """Current UTC time at second resolution (the repository clock)."""
    return datetime.now(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True, order=True)
class Pid:
    """Persistent identifier, rendered as ``namespace:serial``."""

    namespace: str
    serial: int

    def __post_init__(self):
        if not NAMESPACE_RE.match(self.namespace):
            raise ValueError(f"bad PID namespace: {self.namespace!r}")
        if not isinstance(self.serial, int) or self.serial < 0:
            raise ValueError(f"bad PID serial: {self.serial!r}")

    def render(self) -> str:
        return f"{self.namespace}:{self.serial}"

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "Pid":
        namespace, sep, serial = text.partition(":")
        if not sep or not NAMESPACE_RE.match(namespace) or not SERIAL_RE.match(serial):
            raise ValueError(f"bad PID: {text!r}")
        return cls(namespace, int(serial))


class ObjectKind(str, Enum):
    DATA = "DATA"
    BEHAVIOR_DEFINITION = "BEHAVIOR_DEFINITION"
    BEHAVIOR_MECHANISM = "BEHAVIOR_MECHANISM"


class ControlGroup(str, Enum):
    INTERNAL = "INTERNAL"
    EXTERNAL_REF = "EXTERNAL_REF"


class AuditAction(str, Enum):
    INGEST = "INGEST"
    ADD_DATASTREAM = "ADD_DATASTREAM"
    MODIFY_DATASTREAM = "MODIFY_DATASTREAM"
    ADD_DISSEMINATOR = "ADD_DISSEMINATOR"
    MODIFY_DISSEMINATOR = "MODIFY_DISSEMINATOR"
    PURGE_COMPONENT = "PURGE_COMPONENT"  # reserved, not produced yet


@dataclass(frozen=True)
class AuditRecord:
    id: str
    action: AuditAction
    component_id: str
    responsible: str
    date: datetime
    justification: str


@dataclass(frozen=True)
class DatastreamVersion:
    version_id: str
    seq: int
    created: datetime
    mime_type: str
    control: ControlGroup
    location: str
    audit_id: str


@dataclass(frozen=True)
class Datastream:
    id: str
    versions: tuple[DatastreamVersion, ...]


@dataclass(frozen=True)
class DisseminatorVersion:
    version_id: str
    created: datetime
    bdef_pid: Pid
    bmech_pid: Pid
    binding_map: Mapping[str, str]
    audit_id: str


@dataclass(frozen=True)
class Disseminator:
    id: str
    versions: tuple[DisseminatorVersion, ...]


Component = Union[Datastream, Disseminator]


@dataclass(frozen=True)
class DigitalObject:
    pid: Pid
    kind: ObjectKind
    label: str
    created: datetime
    modified: datetime
    system_metadata: Mapping[str, str] = field(default_factory=dict)
    datastreams: Mapping[str, Datastream] = field(default_factory=dict)
    disseminators: Mapping[str, Disseminator] = field(default_factory=dict)
    audit_trail: tuple[AuditRecord, ...] = ()

    def component_ids(self) -> set[str]:
        return set(self.datastreams) | set(self.disseminators)


@dataclass(frozen=True)
class Dissemination:
    """The result of running a disseminator method: content, never a URL."""

    mime_type: str
    body: "Iterator[bytes]"
    produced_at: datetime
    mime_warning: str | None = None

    def read(self) -> bytes:
        """Materialize the stream (consumes it)."""
        return b"".join(self.body)


def select_version(versions: Sequence, as_of: datetime | None = None):
    """Pick the newest version, or the newest one created at/before ``as_of``.

    ``versions`` must be nonempty and ordered newest-first by ``created``.
    """
    if not versions:
        raise ValueError("empty version list")
    if as_of is None:
        return versions[0]
    for version in versions:
        if version.created <= as_of:
            return version
    raise NoVersionAtTime(
        f"no version of {versions[0].version_id.rsplit('.', 1)[0]} existed at "
        f"{format_timestamp(as_of)}"
    )


def version_suffix(component_id: str, version_id: str) -> int | None:
    """The numeric suffix of ``<id>.<n>``, or None if it does not match."""
    prefix = component_id + "."
    if not version_id.startswith(prefix):
        return None
    tail = version_id[len(prefix):]
    return int(tail) if tail.isdigit() else None


def next_version_id(component: Component) -> str:
    """The id the next version of this component will take: ``<id>.<max+1>``."""
    suffixes = [
        n for v in component.versions
        if (n := version_suffix(component.id, v.version_id)) is not None
    ]
    if not suffixes:
        return f"{component.id}.0"
    return f"{component.id}.{max(suffixes) + 1}"


def append_audit(
    obj: DigitalObject,
    action: AuditAction,
    component_id: str,
    responsible: str,
    justification: str,
    now: datetime,
) -> tuple[DigitalObject, AuditRecord]:
    """Append a who/what/when/why record and stamp the object modified."""
    record = AuditRecord(
        id=f"audit{len(obj.audit_trail) + 1}",
        action=action,
        component_id=component_id,
        responsible=responsible,
        date=now,
        justification=justification,
    )
    updated = replace(obj, audit_trail=obj.audit_trail + (record,), modified=now)
    return updated, record


def structmap_id(version_id: str) -> str:
    """Document id of the binding-map section paired with a disseminator version."""
    return f"{version_id}.STRUCT"


def projected_document_ids(obj: DigitalObject) -> list[str]:
    """Every XML id the METS encoding of this object will claim."""
    ids = list(RESERVED_DOC_IDS)
    for ds in obj.datastreams.values():
        ids.append(ds.id)
        ids.extend(v.version_id for v in ds.versions)
    for diss in obj.disseminators.values():
        ids.append(diss.id)
        for v in diss.versions:
            ids.append(v.version_id)
            ids.append(structmap_id(v.version_id))
    ids.extend(rec.id for rec in obj.audit_trail)
    return ids


def _check(cond: bool, message: str):
    if not cond:
        raise InvalidObject(message)


def _check_version_list(owner: str, component_id: str, versions: tuple) -> None:
    _check(len(versions) > 0, f"{owner} {component_id}: no versions")
    previous_created = None
    previous_suffix = None
    for i, v in enumerate(versions):
        suffix = version_suffix(component_id, v.version_id)
        _check(
            suffix is not None,
            f"{owner} {component_id}: version id {v.version_id!r} is not "
            f"'{component_id}.<n>'",
        )
        if previous_created is not None:
            _check(
                v.created < previous_created,
                f"{owner} {component_id}: version timestamps must be strictly "
                f"decreasing newest-first (at {v.version_id})",
            )
            _check(
                suffix < previous_suffix,
                f"{owner} {component_id}: version numbers must decrease "
                f"newest-first (at {v.version_id})",
            )
        previous_created = v.created
        previous_suffix = suffix


def validate_object(obj: DigitalObject) -> None:
    """Raise InvalidObject on the first model-invariant violation."""
    _check(isinstance(obj.kind, ObjectKind), f"unknown object kind {obj.kind!r}")
    _check(is_xml_text(obj.label), "label contains non-XML characters")
    _check(obj.modified >= obj.created, "modified predates created")

    for key, value in obj.system_metadata.items():
        _check(is_xml_text(key) and is_xml_text(value),
               f"system metadata entry {key!r} contains non-XML characters")

    for n, record in enumerate(obj.audit_trail, start=1):
        _check(record.id == f"audit{n}",
               f"audit record {n} has id {record.id!r}, expected 'audit{n}'")
        _check(isinstance(record.action, AuditAction),
               f"audit {record.id}: unknown action {record.action!r}")
        if n > 1:
            _check(record.date >= obj.audit_trail[n - 2].date,
                   f"audit {record.id}: dates must be non-decreasing")
        _check(obj.modified >= record.date,
               f"audit {record.id} is newer than object.modified")
        for text, what in ((record.component_id, "component id"),
                           (record.responsible, "responsible"),
                           (record.justification, "justification")):
            _check(is_xml_text(text), f"audit {record.id}: {what} not XML text")
    audit_ids = {rec.id for rec in obj.audit_trail}

    for dsid, ds in obj.datastreams.items():
        _check(ds.id == dsid, f"datastream map key {dsid!r} != id {ds.id!r}")
        _check(COMPONENT_ID_RE.match(dsid) is not None,
               f"bad datastream id {dsid!r}")
        _check_version_list("datastream", dsid, ds.versions)
        for i, v in enumerate(ds.versions):
            _check(v.seq == i + 1,
                   f"datastream {dsid}: version {v.version_id} has seq {v.seq}, "
                   f"expected {i + 1}")
            _check(isinstance(v.control, ControlGroup),
                   f"datastream {dsid}: unknown control {v.control!r}")
            _check(bool(re.match(r"^[!-~]+/[!-~]+$", v.mime_type)),
                   f"datastream {dsid}: bad media type {v.mime_type!r}")
            if v.control is ControlGroup.EXTERNAL_REF:
                _check(v.location.startswith(("http://", "https://")),
                       f"datastream {dsid}: external location must be an "
                       f"absolute http(s) URL, got {v.location!r}")
            else:
                _check(bool(v.location),
                       f"datastream {dsid}: internal location (content key) empty")
            _check(is_xml_text(v.location),
                   f"datastream {dsid}: location not XML text")
            _check(v.audit_id in audit_ids,
                   f"datastream {dsid}: version {v.version_id} audit id "
                   f"{v.audit_id!r} does not resolve")
            _check(obj.modified >= v.created,
                   f"datastream {dsid}: version {v.version_id} newer than "
                   f"object.modified")

    for dissid, diss in obj.disseminators.items():
        _check(diss.id == dissid, f"disseminator map key {dissid!r} != id {diss.id!r}")
        _check(COMPONENT_ID_RE.match(dissid) is not None,
               f"bad disseminator id {dissid!r}")
        _check_version_list("disseminator", dissid, diss.versions)
        for v in diss.versions:
            _check(v.bdef_pid != v.bmech_pid,
                   f"disseminator {dissid}: bdef and bmech are the same object "
                   f"({v.bdef_pid})")
            for key, target in v.binding_map.items():
                _check(BINDING_KEY_RE.match(key) is not None,
                       f"disseminator {dissid}: bad binding key {key!r}")
                _check(target in obj.datastreams,
                       f"disseminator {dissid}: binding key {key} targets "
                       f"unknown datastream {target!r}")
            _check(v.audit_id in audit_ids,
                   f"disseminator {dissid}: version {v.version_id} audit id "
                   f"{v.audit_id!r} does not resolve")
            _check(obj.modified >= v.created,
                   f"disseminator {dissid}: version {v.version_id} newer than "
                   f"object.modified")

    if obj.kind is ObjectKind.BEHAVIOR_DEFINITION:
        _check(METHOD_MAP_DS in obj.datastreams,
               f"behavior definition lacks reserved datastream {METHOD_MAP_DS}")
    if obj.kind is ObjectKind.BEHAVIOR_MECHANISM:
        _check(SERVICE_BINDINGS_DS in obj.datastreams,
               f"behavior mechanism lacks reserved datastream {SERVICE_BINDINGS_DS}")

    ids = projected_document_ids(obj)
    seen = set()
    for doc_id in ids:
        _check(doc_id not in seen,
               f"document id {doc_id!r} is claimed twice (component, version, "
               f"and section ids share one id space)")
        seen.add(doc_id)
