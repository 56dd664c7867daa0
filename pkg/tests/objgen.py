"""Random valid DigitalObject generator shared by codec and acceptance tests.

Builds objects the way the management layer would: a timeline of audited
mutations, components versioned newest-first. Deterministic for a given
random.Random seed.
"""

import random
from datetime import datetime, timedelta, timezone

from objectrepo.model import (
    AuditAction,
    AuditRecord,
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
    validate_object,
)

_TEXT_POOL = (
    "abcdefghij XYZ0123456789 _-.:,!?"
    "<>&\"'"
    "éü中文☃"
)
_MIME_TYPES = ["image/jgp", "image/png", "text/xml", "application/pdf",
               "audio/wav", "image/x-wavelet"]
_NAMESPACES = ["demo", "uva-lib", "test-ns"]


def _text(rng, max_len=16):
    return "".join(rng.choice(_TEXT_POOL) for _ in range(rng.randint(0, max_len)))


def _component_id(rng, taken):
    while True:
        length = rng.randint(0, 6)
        cid = rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ") + "".join(
            rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-")
            for _ in range(length))
        if cid not in taken and cid not in ("DATASTREAMS", "AUDITTRAIL"):
            taken.add(cid)
            return cid


def _binding_key(rng):
    return rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ") + "".join(
        rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")
        for _ in range(rng.randint(0, 8)))


class _Timeline:
    """Hands out strictly increasing UTC second timestamps."""

    def __init__(self, rng):
        self.now = datetime(rng.randint(1996, 2020), rng.randint(1, 12),
                            rng.randint(1, 28), tzinfo=timezone.utc)
        self.rng = rng

    def tick(self):
        self.now += timedelta(seconds=self.rng.randint(1, 90000))
        return self.now


def random_object(rng: random.Random, kind: ObjectKind | None = None,
                  max_datastreams: int = 8, max_disseminators: int = 4,
                  max_versions: int = 5) -> DigitalObject:
    kind = kind or rng.choice(list(ObjectKind))
    timeline = _Timeline(rng)
    created = timeline.now
    pid = Pid(rng.choice(_NAMESPACES), rng.randint(0, 999999))

    audits: list[AuditRecord] = []

    def audit(action, component_id):
        record = AuditRecord(
            id=f"audit{len(audits) + 1}",
            action=action,
            component_id=component_id,
            responsible=rng.choice(["staples", "payette", "wayland"]),
            date=timeline.now,
            justification=_text(rng),
        )
        audits.append(record)
        return record.id

    audit(AuditAction.INGEST, "")

    taken: set[str] = set()
    ds_ids = []
    if kind is ObjectKind.BEHAVIOR_DEFINITION:
        ds_ids.append(METHOD_MAP_DS)
        taken.add(METHOD_MAP_DS)
    if kind is ObjectKind.BEHAVIOR_MECHANISM:
        ds_ids.append(SERVICE_BINDINGS_DS)
        taken.add(SERVICE_BINDINGS_DS)
    ds_ids += [_component_id(rng, taken)
               for _ in range(rng.randint(0, max_datastreams))]

    datastreams = {}
    for dsid in ds_ids:
        versions = []
        n_versions = rng.randint(1, max_versions)
        for n in range(n_versions):
            action = (AuditAction.ADD_DATASTREAM if n == 0
                      else AuditAction.MODIFY_DATASTREAM)
            timeline.tick()
            audit_id = audit(action, dsid)
            if rng.random() < 0.5:
                control = ControlGroup.INTERNAL
                location = "%064x" % rng.getrandbits(256)
            else:
                control = ControlGroup.EXTERNAL_REF
                location = f"http://content.example.org/{dsid.lower()}/{n}"
            versions.append(DatastreamVersion(
                version_id=f"{dsid}.{n}",
                seq=0,  # assigned below, newest first
                created=timeline.now,
                mime_type=rng.choice(_MIME_TYPES),
                control=control,
                location=location,
                audit_id=audit_id,
            ))
        versions.reverse()
        versions = [DatastreamVersion(
            version_id=v.version_id, seq=i + 1, created=v.created,
            mime_type=v.mime_type, control=v.control, location=v.location,
            audit_id=v.audit_id,
        ) for i, v in enumerate(versions)]
        datastreams[dsid] = Datastream(id=dsid, versions=tuple(versions))

    disseminators = {}
    for _ in range(rng.randint(0, max_disseminators)):
        dissid = _component_id(rng, taken)
        versions = []
        for n in range(rng.randint(1, max_versions)):
            action = (AuditAction.ADD_DISSEMINATOR if n == 0
                      else AuditAction.MODIFY_DISSEMINATOR)
            timeline.tick()
            audit_id = audit(action, dissid)
            bdef = Pid("behaviors", rng.randint(0, 500))
            bmech = Pid("behaviors", rng.randint(501, 1000))
            binding_map = {}
            if ds_ids:
                for _ in range(rng.randint(0, 3)):
                    binding_map[_binding_key(rng)] = rng.choice(ds_ids)
            versions.append(DisseminatorVersion(
                version_id=f"{dissid}.{n}",
                created=timeline.now,
                bdef_pid=bdef,
                bmech_pid=bmech,
                binding_map=binding_map,
                audit_id=audit_id,
            ))
        versions.reverse()
        disseminators[dissid] = Disseminator(id=dissid, versions=tuple(versions))

    obj = DigitalObject(
        pid=pid,
        kind=kind,
        label=_text(rng, 24),
        created=created,
        modified=timeline.now,
        system_metadata={_text(rng, 10): _text(rng)
                         for _ in range(rng.randint(0, 4))},
        datastreams=datastreams,
        disseminators=disseminators,
        audit_trail=tuple(audits),
    )
    validate_object(obj)
    return obj
