"""Management sub-system: ingest, component mutation, purge, export.

Every mutation is a gate: the updated object must pass model validation
and the repository-wide integrity rules before anything is persisted, and
persistence itself is atomic. History is append-only; no operation removes
or rewrites an existing component version or audit record (purge removes
whole objects only).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime
from typing import Callable, Mapping

from . import metsio, model
from .errors import (
    ClockSkew,
    ComponentNotFound,
    ContentNotFound,
    DescriptorError,
    DuplicateComponent,
    ExternalFetchError,
    InUseError,
    IntegrityError,
    InvalidObject,
    ObjectNotFound,
    PidCollision,
    StructuralError,
)
from .model import (
    AuditAction,
    ControlGroup,
    Datastream,
    DatastreamVersion,
    DigitalObject,
    Disseminator,
    DisseminatorVersion,
    METHOD_MAP_DS,
    SERVICE_BINDINGS_DS,
    ObjectKind,
    Pid,
    append_audit,
    next_version_id,
    utc_now,
)
from .servicedesc import parse_bindings
from .store import Repository

#: The closed set of referential-integrity rules.
INTEGRITY_RULES = frozenset({
    "BDEF_MISSING", "BMECH_MISSING", "KIND_MISMATCH", "IMPLEMENTS_MISMATCH",
    "UNBOUND_KEY", "DANGLING_BINDING", "RESERVED_DS_MISSING",
})

#: Pseudo-rule carried by IntegrityError when a per-field model invariant
#: (not a cross-object rule) blocks a mutation.
MODEL_INVARIANT = "MODEL_INVARIANT"

#: OBJID values that ask ingest to mint a PID.
PLACEHOLDER_OBJIDS = (None, "", "new")


@dataclass(frozen=True)
class IntegrityViolation:
    rule: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule} at {self.subject}: {self.message}"


def _descriptor_content(repo: Repository, surrogate: DigitalObject,
                        dsid: str) -> bytes | None:
    """Newest reserved-descriptor bytes, or None when the content is not
    reachable right now (lazily stored blobs, unreachable external source)."""
    ds = surrogate.datastreams.get(dsid)
    if ds is None:
        return None
    version = ds.versions[0]
    try:
        if version.control is ControlGroup.INTERNAL:
            return repo.get_content(version.location)
        return b"".join(repo.fetcher.fetch(version.location).chunks)
    except (ContentNotFound, ExternalFetchError):
        return None


def validate_integrity(obj: DigitalObject, repo: Repository,
                       overrides: Mapping[str, DigitalObject] | None = None
                       ) -> list[IntegrityViolation]:
    """Check the repository-level rules for one object.

    ``overrides`` supplies not-yet-committed objects (keyed by rendered
    PID) so a mutation can be validated against the state it would create.
    """
    overrides = dict(overrides or {})
    overrides.setdefault(obj.pid.render(), obj)

    def resolve(pid: Pid) -> DigitalObject | None:
        hit = overrides.get(pid.render())
        if hit is not None:
            return hit
        try:
            return repo.get_object(pid)
        except ObjectNotFound:
            return None

    violations: list[IntegrityViolation] = []

    def check_surrogate(pid: Pid, expected_kind: ObjectKind, reserved: str,
                        subject: str, missing_rule: str
                        ) -> DigitalObject | None:
        surrogate = resolve(pid)
        if surrogate is None:
            violations.append(IntegrityViolation(
                missing_rule, subject, f"{pid.render()} does not resolve"))
            return None
        if surrogate.kind is not expected_kind:
            violations.append(IntegrityViolation(
                "KIND_MISMATCH", subject,
                f"{pid.render()} is {surrogate.kind.value}, expected "
                f"{expected_kind.value}"))
            return None
        if reserved not in surrogate.datastreams:
            violations.append(IntegrityViolation(
                "RESERVED_DS_MISSING", subject,
                f"{pid.render()} lacks datastream {reserved}"))
            return None
        return surrogate

    for dissid in sorted(obj.disseminators):
        for version in obj.disseminators[dissid].versions:
            subject = f"{obj.pid.render()}/{version.version_id}"
            check_surrogate(version.bdef_pid,
                            ObjectKind.BEHAVIOR_DEFINITION, METHOD_MAP_DS,
                            subject, "BDEF_MISSING")
            bmech = check_surrogate(version.bmech_pid,
                                    ObjectKind.BEHAVIOR_MECHANISM,
                                    SERVICE_BINDINGS_DS, subject,
                                    "BMECH_MISSING")
            if bmech is not None:
                descriptor = _descriptor_content(repo, bmech,
                                                 SERVICE_BINDINGS_DS)
                if descriptor is not None:
                    try:
                        bindings = parse_bindings(descriptor)
                    except DescriptorError as exc:
                        violations.append(IntegrityViolation(
                            "RESERVED_DS_MISSING", subject,
                            f"{version.bmech_pid.render()} descriptor is "
                            f"present but unusable: {exc}"))
                        bindings = None
                    if bindings is not None:
                        if bindings.implements_bdef != version.bdef_pid:
                            violations.append(IntegrityViolation(
                                "IMPLEMENTS_MISMATCH", subject,
                                f"{version.bmech_pid.render()} implements "
                                f"{bindings.implements_bdef.render()}, "
                                f"disseminator subscribes to "
                                f"{version.bdef_pid.render()}"))
                        required = set()
                        for binding in bindings.bindings.values():
                            required.update(binding.binding_keys)
                        for key in sorted(required):
                            if key not in version.binding_map:
                                violations.append(IntegrityViolation(
                                    "UNBOUND_KEY", subject,
                                    f"mechanism requires key {key}, "
                                    f"binding map does not supply it"))
            for key in sorted(version.binding_map):
                target = version.binding_map[key]
                if target not in obj.datastreams:
                    violations.append(IntegrityViolation(
                        "DANGLING_BINDING", subject,
                        f"key {key} targets unknown datastream {target!r}"))

    if obj.kind is ObjectKind.BEHAVIOR_DEFINITION \
            and METHOD_MAP_DS not in obj.datastreams:
        violations.append(IntegrityViolation(
            "RESERVED_DS_MISSING", obj.pid.render(),
            f"behavior definition lacks datastream {METHOD_MAP_DS}"))
    if obj.kind is ObjectKind.BEHAVIOR_MECHANISM \
            and SERVICE_BINDINGS_DS not in obj.datastreams:
        violations.append(IntegrityViolation(
            "RESERVED_DS_MISSING", obj.pid.render(),
            f"behavior mechanism lacks datastream {SERVICE_BINDINGS_DS}"))
    return violations


class ManagementService:
    def __init__(self, repo: Repository, *, default_namespace: str = "demo",
                 clock: Callable[[], datetime] = utc_now):
        self.repo = repo
        self.default_namespace = default_namespace
        self.clock = clock

    # -- ingest / export ---------------------------------------------------

    def ingest(self, data: bytes, principal: str,
               justification: str = "") -> Pid:
        """Accept an externally authored METS document as a new object.

        The document's own component timestamps and audit trail are
        preserved; an INGEST record is appended on top. OBJID absent or
        "new" asks the repository to mint the PID.
        """
        root = metsio.parse_document(data)
        objid = root.get("OBJID")
        minted = objid in PLACEHOLDER_OBJIDS
        if minted:
            pid = self.repo.mint_pid(self.default_namespace)
            root.set("OBJID", pid.render())
        violations = metsio.validate_tree(root)
        if violations:
            raise StructuralError(violations)
        if not minted:
            pid = Pid.parse(objid)
        obj = metsio.decode_tree(root)

        with self.repo.lock_for(pid):
            if self.repo.object_exists(pid):
                raise PidCollision(f"{pid.render()} already exists")
            now = self._mutation_time(obj)
            obj, _ = append_audit(obj, AuditAction.INGEST, "", principal,
                                  justification, now)
            self.repo.reserve_pid(pid)
            self._commit(obj)
        return pid

    def export(self, pid: Pid) -> bytes:
        """Canonical METS bytes; ingesting them elsewhere reproduces the
        object (content blobs travel separately)."""
        return metsio.encode_object(self.repo.get_object(pid))

    # -- datastreams --------------------------------------------------------

    def add_datastream(self, pid: Pid, dsid: str, mime_type: str,
                       control: ControlGroup,
                       location_or_bytes: str | bytes, principal: str,
                       justification: str = "") -> str:
        with self.repo.lock_for(pid):
            obj = self.repo.get_object(pid)
            if dsid in obj.component_ids():
                raise DuplicateComponent(
                    f"{pid.render()} already has component {dsid}")
            now = self._mutation_time(obj)
            location = self._route_content(control, location_or_bytes)
            obj, record = append_audit(obj, AuditAction.ADD_DATASTREAM, dsid,
                                       principal, justification, now)
            version = DatastreamVersion(
                version_id=f"{dsid}.0", seq=1, created=now,
                mime_type=mime_type, control=control, location=location,
                audit_id=record.id)
            datastreams = dict(obj.datastreams)
            datastreams[dsid] = Datastream(id=dsid, versions=(version,))
            self._commit(replace(obj, datastreams=datastreams))
            return version.version_id

    def modify_datastream(self, pid: Pid, dsid: str,
                          mime_type: str | None = None,
                          control: ControlGroup | None = None,
                          location_or_bytes: str | bytes | None = None,
                          principal: str = "", justification: str = "") -> str:
        """Append a new version; prior versions are retained and shift down."""
        with self.repo.lock_for(pid):
            obj = self.repo.get_object(pid)
            ds = obj.datastreams.get(dsid)
            if ds is None:
                raise ComponentNotFound(
                    f"{pid.render()} has no datastream {dsid}")
            now = self._mutation_time(obj, ds)
            previous = ds.versions[0]
            if (control is None) != (location_or_bytes is None):
                raise ValueError("control and content must be given together")
            if control is None:
                control, location = previous.control, previous.location
            else:
                location = self._route_content(control, location_or_bytes)
            version = DatastreamVersion(
                version_id=next_version_id(ds), seq=1, created=now,
                mime_type=mime_type or previous.mime_type, control=control,
                location=location, audit_id=f"audit{len(obj.audit_trail) + 1}")
            obj, record = append_audit(obj, AuditAction.MODIFY_DATASTREAM,
                                       dsid, principal, justification, now)
            assert record.id == version.audit_id
            versions = (version,) + tuple(
                replace(v, seq=i + 2) for i, v in enumerate(ds.versions))
            datastreams = dict(obj.datastreams)
            datastreams[dsid] = Datastream(id=dsid, versions=versions)
            self._commit(replace(obj, datastreams=datastreams))
            return version.version_id

    # -- disseminators -------------------------------------------------------

    def add_disseminator(self, pid: Pid, dissid: str, bdef_pid: Pid,
                         bmech_pid: Pid, binding_map: Mapping[str, str],
                         principal: str = "", justification: str = "") -> str:
        with self.repo.lock_for(pid):
            obj = self.repo.get_object(pid)
            if dissid in obj.component_ids():
                raise DuplicateComponent(
                    f"{pid.render()} already has component {dissid}")
            now = self._mutation_time(obj)
            obj, record = append_audit(obj, AuditAction.ADD_DISSEMINATOR,
                                       dissid, principal, justification, now)
            version = DisseminatorVersion(
                version_id=f"{dissid}.0", created=now, bdef_pid=bdef_pid,
                bmech_pid=bmech_pid, binding_map=dict(binding_map),
                audit_id=record.id)
            disseminators = dict(obj.disseminators)
            disseminators[dissid] = Disseminator(id=dissid,
                                                 versions=(version,))
            self._commit(replace(obj, disseminators=disseminators))
            return version.version_id

    def modify_disseminator(self, pid: Pid, dissid: str, bdef_pid: Pid,
                            bmech_pid: Pid, binding_map: Mapping[str, str],
                            principal: str = "",
                            justification: str = "") -> str:
        with self.repo.lock_for(pid):
            obj = self.repo.get_object(pid)
            diss = obj.disseminators.get(dissid)
            if diss is None:
                raise ComponentNotFound(
                    f"{pid.render()} has no disseminator {dissid}")
            now = self._mutation_time(obj, diss)
            obj, record = append_audit(obj, AuditAction.MODIFY_DISSEMINATOR,
                                       dissid, principal, justification, now)
            version = DisseminatorVersion(
                version_id=next_version_id(diss), created=now,
                bdef_pid=bdef_pid, bmech_pid=bmech_pid,
                binding_map=dict(binding_map), audit_id=record.id)
            disseminators = dict(obj.disseminators)
            disseminators[dissid] = Disseminator(
                id=dissid, versions=(version,) + diss.versions)
            self._commit(replace(obj, disseminators=disseminators))
            return version.version_id

    # -- purge ---------------------------------------------------------------

    def purge_object(self, pid: Pid, principal: str = "",
                     justification: str = ""):
        """Remove a whole object. Refused while any other object's
        disseminator history references it; the PID is never reissued."""
        with self.repo.lock_for(pid):
            if not self.repo.object_exists(pid):
                raise ObjectNotFound(f"no object {pid.render()}")
            dependents = self._dependents(pid)
            if dependents:
                raise InUseError(dependents)
            self.repo.reserve_pid(pid)
            self.repo.remove_object(pid)

    def _dependents(self, pid: Pid) -> list[str]:
        rendered = pid.render()
        dependents = []
        for entry in self.repo.list_objects():
            if entry.pid == rendered:
                continue
            other = self.repo.get_object(Pid.parse(entry.pid))
            for diss in other.disseminators.values():
                if any(v.bdef_pid == pid or v.bmech_pid == pid
                       for v in diss.versions):
                    dependents.append(entry.pid)
                    break
        return dependents

    # -- shared plumbing ------------------------------------------------------

    def _mutation_time(self, obj: DigitalObject, component=None) -> datetime:
        now = self.clock()
        if obj.audit_trail and now < obj.audit_trail[-1].date:
            raise ClockSkew("clock went backwards; retry")
        if component is not None and component.versions \
                and now <= component.versions[0].created:
            raise ClockSkew(
                f"{component.id} already changed at "
                f"{model.format_timestamp(component.versions[0].created)}; "
                f"retry in a second")
        return now

    def _route_content(self, control: ControlGroup,
                       location_or_bytes: str | bytes) -> str:
        if control is ControlGroup.INTERNAL:
            if not isinstance(location_or_bytes, bytes):
                raise ValueError("internal datastreams take content bytes")
            return self.repo.put_content(location_or_bytes)
        if not isinstance(location_or_bytes, str):
            raise ValueError("external datastreams take a location URL")
        return location_or_bytes

    def _commit(self, obj: DigitalObject):
        """Validate (model, integrity, dependents) then persist atomically."""
        try:
            model.validate_object(obj)
        except InvalidObject as exc:
            raise IntegrityError([IntegrityViolation(
                MODEL_INVARIANT, obj.pid.render(), str(exc))]) from exc
        violations = validate_integrity(obj, self.repo)
        if violations:
            raise IntegrityError(violations)
        if obj.kind is not ObjectKind.DATA:
            overrides = {obj.pid.render(): obj}
            for dependent_pid in self._dependents(obj.pid):
                dependent = self.repo.get_object(Pid.parse(dependent_pid))
                dependent_violations = validate_integrity(
                    dependent, self.repo, overrides)
                if dependent_violations:
                    raise IntegrityError(
                        dependent_violations,
                        f"change to {obj.pid.render()} would break "
                        f"{dependent_pid}: "
                        + "; ".join(str(v) for v in dependent_violations))
        self.repo.put_object(obj)
