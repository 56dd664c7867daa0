"""Access sub-system: object reflection and mediated dissemination.

Dissemination never hands the caller a URL. The pipeline evaluates the
disseminator at the requested time, loads the definition and mechanism
surrogates (version-selected with the same timestamp), wires binding keys
to repository-issued datastream URLs, instantiates the mechanism's URL
template, dispatches it, and streams the result body back.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime
from typing import Iterator

from .errors import (
    BindingIntegrityError,
    MissingRequiredParam,
    NoSuchMethod,
    NoSuchSubscription,
    NoVersionAtTime,
    ObjectNotFound,
)
from .model import (
    ControlGroup,
    DigitalObject,
    Dissemination,
    DisseminatorVersion,
    METHOD_MAP_DS,
    SERVICE_BINDINGS_DS,
    ObjectKind,
    Pid,
    format_timestamp,
    select_version,
    utc_now,
)
from .servicedesc import (
    MethodDef,
    MethodMap,
    ServiceBindings,
    instantiate_binding,
    parse_bindings,
    parse_method_map,
)
from .store import Repository


@dataclass(frozen=True)
class BehaviorProfile:
    """The methods one behavior definition offers on an object at a moment."""

    bdef_pid: Pid
    methods: tuple[MethodDef, ...]

    def method_names(self) -> list[str]:
        return [m.name for m in self.methods]


def mime_matches(expected: str, actual: str) -> bool:
    if expected == "*/*":
        return True
    if expected.endswith("/*"):
        return actual.split("/")[0] == expected.split("/")[0]
    return expected == actual


class AccessService:
    def __init__(self, repo: Repository, public_base_url: str):
        self.repo = repo
        self.base_url = public_base_url.rstrip("/")
        self._descriptor_cache: dict[tuple[str, str], object] = {}
        self._cache_lock = threading.Lock()

    # -- reflection -------------------------------------------------------

    def get_behavior_def_types(self, pid: Pid,
                               as_of: datetime | None = None) -> list[Pid]:
        """Behavior definitions the object subscribes to at ``as_of``."""
        obj = self.repo.get_object(pid)
        if as_of is not None and as_of < obj.created:
            raise NoVersionAtTime(
                f"{pid.render()} did not exist at {format_timestamp(as_of)}")
        found: set[Pid] = set()
        for diss in obj.disseminators.values():
            version = self._live_version(diss.versions, as_of)
            if version is not None:
                found.add(version.bdef_pid)
        return sorted(found)

    def get_methods(self, pid: Pid, bdef_pid: Pid,
                    as_of: datetime | None = None) -> BehaviorProfile:
        """The method set the bdef surrogate declares, as of the same time."""
        obj = self.repo.get_object(pid)
        self._subscription(obj, bdef_pid, as_of)
        method_map = self._method_map(bdef_pid, as_of)
        methods = tuple(method_map.methods[name]
                        for name in sorted(method_map.methods))
        return BehaviorProfile(bdef_pid=bdef_pid, methods=methods)

    # -- dissemination ----------------------------------------------------

    def get_dissemination(self, pid: Pid, bdef_pid: Pid, method: str,
                          user_args: dict[str, str] | None = None,
                          as_of: datetime | None = None) -> Dissemination:
        obj = self.repo.get_object(pid)
        diss_version = self._subscription(obj, bdef_pid, as_of)

        method_map = self._method_map(bdef_pid, as_of)
        method_def = method_map.methods.get(method)
        if method_def is None:
            raise NoSuchMethod(
                f"{bdef_pid.render()} declares no method {method!r}")
        args = self._merge_args(method_def, user_args or {})

        bindings = self._service_bindings(diss_version.bmech_pid, as_of)
        if bindings.implements_bdef != bdef_pid:
            raise BindingIntegrityError(
                f"mechanism {diss_version.bmech_pid.render()} implements "
                f"{bindings.implements_bdef.render()}, not "
                f"{bdef_pid.render()}")
        binding = bindings.bindings.get(method)
        if binding is None:
            raise BindingIntegrityError(
                f"mechanism {diss_version.bmech_pid.render()} has no binding "
                f"for {method!r}")

        key_values = {}
        for key in binding.binding_keys:
            dsid = diss_version.binding_map.get(key)
            if dsid is None:
                raise BindingIntegrityError(
                    f"binding key {key} is not wired to a datastream")
            key_values[key] = self.datastream_url(pid, dsid, as_of)

        request = instantiate_binding(binding, key_values, args)
        result = self.repo.fetcher.fetch(request.url, request.verb)

        warning = None
        if not mime_matches(request.expected_mime, result.mime_type):
            warning = (f"mechanism declared {request.expected_mime}, "
                       f"upstream sent {result.mime_type}")
        return Dissemination(
            mime_type=result.mime_type,
            body=result.chunks,
            produced_at=utc_now(),
            mime_warning=warning,
        )

    def get_datastream_direct(self, pid: Pid, dsid: str,
                              as_of: datetime | None = None
                              ) -> tuple[str, Iterator[bytes]]:
        """The raw datastream bytes binding-key URLs point at."""
        obj = self.repo.get_object(pid)
        return self.repo.resolve_datastream(obj, dsid, as_of)

    def datastream_url(self, pid: Pid, dsid: str,
                       as_of: datetime | None = None) -> str:
        url = f"{self.base_url}/get/{pid.render()}/{dsid}"
        if as_of is not None:
            url += f"?asOfDate={format_timestamp(as_of)}"
        return url

    # -- internals --------------------------------------------------------

    @staticmethod
    def _live_version(versions, as_of) -> DisseminatorVersion | None:
        try:
            return select_version(versions, as_of)
        except NoVersionAtTime:
            return None

    def _subscription(self, obj: DigitalObject, bdef_pid: Pid,
                      as_of: datetime | None) -> DisseminatorVersion:
        for dissid in sorted(obj.disseminators):
            version = self._live_version(
                obj.disseminators[dissid].versions, as_of)
            if version is not None and version.bdef_pid == bdef_pid:
                return version
        # A subscription that exists but postdates as_of is a time miss,
        # not a missing subscription.
        for diss in obj.disseminators.values():
            if any(v.bdef_pid == bdef_pid for v in diss.versions):
                raise NoVersionAtTime(
                    f"{obj.pid.render()} did not subscribe to "
                    f"{bdef_pid.render()} yet at "
                    f"{format_timestamp(as_of) if as_of else 'now'}")
        raise NoSuchSubscription(
            f"{obj.pid.render()} does not subscribe to {bdef_pid.render()}")

    @staticmethod
    def _merge_args(method_def: MethodDef,
                    user_args: dict[str, str]) -> dict[str, str]:
        merged = {}
        for param in method_def.user_params:
            if param.name in user_args:
                merged[param.name] = user_args[param.name]
            elif param.required:
                raise MissingRequiredParam(param.name)
            else:
                merged[param.name] = param.default
        return merged

    def _surrogate(self, pid: Pid, kind: ObjectKind) -> DigitalObject:
        try:
            surrogate = self.repo.get_object(pid)
        except ObjectNotFound:
            raise ObjectNotFound(f"surrogate {pid.render()} not found")
        if surrogate.kind is not kind:
            raise BindingIntegrityError(
                f"{pid.render()} is {surrogate.kind.value}, "
                f"expected {kind.value}")
        return surrogate

    def _descriptor(self, pid: Pid, kind: ObjectKind, dsid: str,
                    as_of: datetime | None, parser):
        """Load + parse a surrogate's reserved descriptor, caching by
        (pid, version id): surrogate modification creates a new version id,
        which invalidates naturally."""
        surrogate = self._surrogate(pid, kind)
        ds = surrogate.datastreams.get(dsid)
        if ds is None:
            raise BindingIntegrityError(
                f"{pid.render()} lacks its reserved datastream {dsid}")
        version = select_version(ds.versions, as_of)
        cache_key = (pid.render(), version.version_id)
        with self._cache_lock:
            cached = self._descriptor_cache.get(cache_key)
        if cached is not None:
            return cached
        if version.control is ControlGroup.INTERNAL:
            data = self.repo.get_content(version.location)
        else:
            data = b"".join(self.repo.fetcher.fetch(version.location).chunks)
        parsed = parser(data)
        with self._cache_lock:
            self._descriptor_cache[cache_key] = parsed
        return parsed

    def _method_map(self, bdef_pid: Pid,
                    as_of: datetime | None) -> MethodMap:
        return self._descriptor(bdef_pid, ObjectKind.BEHAVIOR_DEFINITION,
                                METHOD_MAP_DS, as_of, parse_method_map)

    def _service_bindings(self, bmech_pid: Pid,
                          as_of: datetime | None) -> ServiceBindings:
        return self._descriptor(bmech_pid, ObjectKind.BEHAVIOR_MECHANISM,
                                SERVICE_BINDINGS_DS, as_of, parse_bindings)
