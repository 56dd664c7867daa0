"""Repository seeding with the two image content models.

Model A carries four resolution datastreams; model B one wavelet-style
datastream. Both subscribe to the same behavior definition through
different mechanisms, so they answer the same methods interchangeably:

    GetThumbnail        A: echo of THUMB        B: first 16 bytes of WAVELET
    GetHighResolution   A: echo of HIGH         B: echo of WAVELET
    GetCaption          both: watermark transform of the thumbnail source

One behavior definition is seeded always; one mechanism per distinct model
in the mix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from ..model import (
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
    utc_now,
)
from ..servicedesc import (
    MethodDef,
    MethodMap,
    UserParam,
    render_bindings,
    render_method_map,
)
from ..store import Repository


class ContentModel(str, Enum):
    FOUR_RESOLUTIONS = "A"
    WAVELET = "B"


MODEL_DATASTREAMS = {
    ContentModel.FOUR_RESOLUTIONS: ("THUMB", "LOW", "MED", "HIGH"),
    ContentModel.WAVELET: ("WAVELET",),
}

MODEL_BINDINGS = {
    ContentModel.FOUR_RESOLUTIONS: {"THUMBSRC": "THUMB", "HIGHSRC": "HIGH"},
    ContentModel.WAVELET: {"THUMBSRC": "WAVELET", "HIGHSRC": "WAVELET"},
}

THUMBNAIL_BYTES = 16


def image_method_map() -> MethodMap:
    return MethodMap(methods={
        "GetThumbnail": MethodDef("GetThumbnail", binding_keys=("THUMBSRC",)),
        "GetHighResolution": MethodDef("GetHighResolution",
                                       binding_keys=("HIGHSRC",)),
        "GetCaption": MethodDef(
            "GetCaption", binding_keys=("THUMBSRC",),
            user_params=(UserParam("TEXT", required=False,
                                   default="archive copy"),)),
    })


def mechanism_operations(model: ContentModel, echo_base: str,
                         resizer_base: str, watermarker_base: str
                         ) -> dict[str, tuple[str, str, str]]:
    caption = ("GET", f"{watermarker_base}/wm?src=(THUMBSRC)&msg=(TEXT)",
               "*/*")
    high = ("GET", f"{echo_base}/echo?src=(HIGHSRC)", "*/*")
    if model is ContentModel.FOUR_RESOLUTIONS:
        thumb = ("GET", f"{echo_base}/echo?src=(THUMBSRC)", "*/*")
    else:
        thumb = ("GET", f"{resizer_base}/resize?src=(THUMBSRC)"
                        f"&size={THUMBNAIL_BYTES}", "*/*")
    return {"GetThumbnail": thumb, "GetHighResolution": high,
            "GetCaption": caption}


@dataclass
class SeedResult:
    bdef_pid: Pid
    bmech_pids: dict[ContentModel, Pid] = field(default_factory=dict)
    object_pids: list[Pid] = field(default_factory=list)

    @property
    def surrogate_count(self) -> int:
        return 1 + len(self.bmech_pids)


def _surrogate(pid: Pid, kind: ObjectKind, label: str, dsid: str,
               content_key: str, now: datetime) -> DigitalObject:
    obj = DigitalObject(pid=pid, kind=kind, label=label, created=now,
                        modified=now)
    obj, record = append_audit(obj, AuditAction.INGEST, "", "harness",
                               "seeded surrogate", now)
    version = DatastreamVersion(
        version_id=f"{dsid}.0", seq=1, created=now,
        mime_type="text/xml", control=ControlGroup.INTERNAL,
        location=content_key, audit_id=record.id)
    return DigitalObject(
        pid=obj.pid, kind=obj.kind, label=obj.label, created=obj.created,
        modified=obj.modified, system_metadata=obj.system_metadata,
        datastreams={dsid: Datastream(id=dsid, versions=(version,))},
        disseminators={}, audit_trail=obj.audit_trail)


def _data_object(pid: Pid, model: ContentModel, bdef: Pid, bmech: Pid,
                 content_keys: dict[str, str], label: str,
                 now: datetime) -> DigitalObject:
    obj = DigitalObject(pid=pid, kind=ObjectKind.DATA, label=label,
                        created=now, modified=now,
                        system_metadata={"content-model": model.value})
    obj, record = append_audit(obj, AuditAction.INGEST, "", "harness",
                               "seeded object", now)
    datastreams = {}
    for dsid in MODEL_DATASTREAMS[model]:
        datastreams[dsid] = Datastream(id=dsid, versions=(
            DatastreamVersion(
                version_id=f"{dsid}.0", seq=1, created=now,
                mime_type="application/octet-stream",
                control=ControlGroup.INTERNAL,
                location=content_keys[dsid], audit_id=record.id),
        ))
    disseminator = Disseminator(id="DISS1", versions=(
        DisseminatorVersion(
            version_id="DISS1.0", created=now, bdef_pid=bdef,
            bmech_pid=bmech, binding_map=dict(MODEL_BINDINGS[model]),
            audit_id=record.id),
    ))
    return DigitalObject(
        pid=obj.pid, kind=obj.kind, label=obj.label, created=obj.created,
        modified=obj.modified, system_metadata=obj.system_metadata,
        datastreams=datastreams, disseminators={"DISS1": disseminator},
        audit_trail=obj.audit_trail)


def model_content(model: ContentModel, dsid: str) -> bytes:
    """Deterministic datastream bytes shared by all objects of one model."""
    payload = f"{model.value}:{dsid}:".encode()
    return payload + bytes(range(64))


def seed_repository(repo: Repository, n_objects: int,
                    mix: tuple[ContentModel, ...] = (
                        ContentModel.FOUR_RESOLUTIONS, ContentModel.WAVELET),
                    *, namespace: str = "demo",
                    echo_base: str, resizer_base: str, watermarker_base: str,
                    now: datetime | None = None) -> SeedResult:
    """Seed surrogates plus ``n_objects`` data objects cycling through ``mix``."""
    if not mix:
        raise ValueError("mix must name at least one content model")
    now = now or utc_now()
    method_map = image_method_map()

    bdef_pid = repo.mint_pid(namespace)
    methodmap_key = repo.put_content(render_method_map(method_map, "image"))
    repo.put_object(_surrogate(
        bdef_pid, ObjectKind.BEHAVIOR_DEFINITION, "image behaviors",
        METHOD_MAP_DS, methodmap_key, now))

    result = SeedResult(bdef_pid=bdef_pid)
    for model in dict.fromkeys(mix):
        bmech_pid = repo.mint_pid(namespace)
        descriptor = render_bindings(
            method_map, bdef_pid,
            echo_base if model is ContentModel.FOUR_RESOLUTIONS
            else resizer_base,
            mechanism_operations(model, echo_base, resizer_base,
                                 watermarker_base),
            name=f"image-mechanism-{model.value}")
        bindings_key = repo.put_content(descriptor)
        repo.put_object(_surrogate(
            bmech_pid, ObjectKind.BEHAVIOR_MECHANISM,
            f"image mechanism {model.value}", SERVICE_BINDINGS_DS,
            bindings_key, now))
        result.bmech_pids[model] = bmech_pid

    content_keys = {
        (model, dsid): repo.put_content(model_content(model, dsid))
        for model in dict.fromkeys(mix)
        for dsid in MODEL_DATASTREAMS[model]
    }
    for i in range(n_objects):
        model = mix[i % len(mix)]
        pid = repo.mint_pid(namespace)
        keys = {dsid: content_keys[(model, dsid)]
                for dsid in MODEL_DATASTREAMS[model]}
        repo.put_object(_data_object(
            pid, model, bdef_pid, result.bmech_pids[model], keys,
            f"seeded image {i + 1} (model {model.value})", now))
        result.object_pids.append(pid)
    return result
