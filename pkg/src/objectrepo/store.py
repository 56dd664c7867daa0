"""Durable storage: METS object files, content blobs, PID registry, index.

On-disk layout (see ``docs/storage-layout.md``)::

    <root>/objects/<namespace>/<serial>.mets.xml   one canonical file per object
    <root>/content/<first2>/<sha256>               immutable content blobs
    <root>/registry/<namespace>.counter            last issued PID serial

Object writes are atomic (write-temp-then-rename). Writes to one object are
serialized by a per-PID lock owned by this module; distinct objects write
in parallel. The in-memory index mirrors the object files after every
committed write and is rebuilt by a directory scan at startup.
"""

from __future__ import annotations

import hashlib
import os
import re
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterator

from . import metsio, model
from .errors import (
    ComponentNotFound,
    ContentNotFound,
    ObjectNotFound,
    StorageError,
    StructuralError,
)
from .fetch import DEFAULT_SIZE_CAP, DEFAULT_TIMEOUT, HttpFetcher
from .model import ControlGroup, DigitalObject, ObjectKind, Pid, select_version

CONTENT_KEY_RE = re.compile(r"^[0-9a-f]{64}$")
_READ_CHUNK = 64 * 1024


def content_key_for(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class IndexEntry:
    pid: str
    kind: ObjectKind
    label: str
    modified: datetime
    path: Path


class Repository:
    def __init__(self, root, *, fetcher: HttpFetcher | None = None,
                 fetch_timeout: float = DEFAULT_TIMEOUT,
                 size_cap: int = DEFAULT_SIZE_CAP, fsync: bool = True):
        self.root = Path(root)
        self.objects_dir = self.root / "objects"
        self.content_dir = self.root / "content"
        self.registry_dir = self.root / "registry"
        for directory in (self.objects_dir, self.content_dir,
                          self.registry_dir):
            directory.mkdir(parents=True, exist_ok=True)
        self.fetcher = fetcher or HttpFetcher(timeout=fetch_timeout,
                                              size_cap=size_cap)
        self._fsync = fsync
        self._index: dict[str, IndexEntry] = {}
        self._index_lock = threading.Lock()
        self._cache: dict[str, tuple[int, DigitalObject]] = {}
        self._pid_locks: dict[str, threading.RLock] = {}
        self._locks_guard = threading.Lock()
        self._registry_lock = threading.Lock()
        self.rebuild_index()

    # -- paths ----------------------------------------------------------

    def object_path(self, pid: Pid) -> Path:
        return self.objects_dir / pid.namespace / f"{pid.serial}{metsio.FILE_EXTENSION}"

    def content_path(self, key: str) -> Path:
        return self.content_dir / key[:2] / key

    # -- locking --------------------------------------------------------

    def lock_for(self, pid: Pid) -> threading.RLock:
        """The write-serialization lock for one object."""
        rendered = pid.render()
        with self._locks_guard:
            lock = self._pid_locks.get(rendered)
            if lock is None:
                lock = self._pid_locks[rendered] = threading.RLock()
            return lock

    # -- object files ----------------------------------------------------

    def _atomic_write(self, path: Path, data: bytes):
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
                if self._fsync:
                    handle.flush()
                    os.fsync(handle.fileno())
            os.replace(tmp, path)
        except OSError as exc:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise StorageError(f"write failed: {exc}") from exc

    def put_object(self, obj: DigitalObject):
        """Atomically persist the canonical METS file and update the index."""
        data = metsio.encode_object(obj)
        path = self.object_path(obj.pid)
        rendered = obj.pid.render()
        with self.lock_for(obj.pid):
            self._atomic_write(path, data)
            entry = IndexEntry(pid=rendered, kind=obj.kind, label=obj.label,
                               modified=obj.modified, path=path)
            with self._index_lock:
                self._index[rendered] = entry
                self._cache[rendered] = (path.stat().st_mtime_ns, obj)

    def get_object(self, pid: Pid) -> DigitalObject:
        rendered = pid.render()
        with self._index_lock:
            entry = self._index.get(rendered)
        if entry is None:
            raise ObjectNotFound(f"no object {rendered}")
        with self.lock_for(pid):
            try:
                mtime = entry.path.stat().st_mtime_ns
            except FileNotFoundError:
                raise ObjectNotFound(f"no object {rendered}")
            with self._index_lock:
                cached = self._cache.get(rendered)
            if cached and cached[0] == mtime:
                return cached[1]
            data = entry.path.read_bytes()
            obj = metsio.decode_object(data)
            with self._index_lock:
                self._cache[rendered] = (mtime, obj)
            return obj

    def object_exists(self, pid: Pid) -> bool:
        with self._index_lock:
            return pid.render() in self._index

    def remove_object(self, pid: Pid):
        """Drop one object file and its index entry. No dependency checks."""
        rendered = pid.render()
        with self.lock_for(pid):
            with self._index_lock:
                entry = self._index.get(rendered)
            if entry is None:
                raise ObjectNotFound(f"no object {rendered}")
            try:
                os.remove(entry.path)
            except FileNotFoundError:
                pass
            except OSError as exc:
                raise StorageError(f"remove failed: {exc}") from exc
            with self._index_lock:
                self._index.pop(rendered, None)
                self._cache.pop(rendered, None)

    def list_objects(self, kind: ObjectKind | None = None,
                     label: str | None = None) -> list[IndexEntry]:
        with self._index_lock:
            entries = list(self._index.values())
        if kind is not None:
            entries = [e for e in entries if e.kind == kind]
        if label is not None:
            entries = [e for e in entries if label in e.label]
        return sorted(entries, key=lambda e: e.pid)

    def index_snapshot(self) -> dict[str, IndexEntry]:
        with self._index_lock:
            return dict(self._index)

    def rebuild_index(self):
        """Scan the object tree and rebuild the in-memory index."""
        index: dict[str, IndexEntry] = {}
        for path in sorted(self.objects_dir.glob(
                f"*/*{metsio.FILE_EXTENSION}")):
            objid, kind, label, modified = metsio.read_header(
                path.read_bytes())
            index[objid] = IndexEntry(
                pid=objid, kind=ObjectKind(kind), label=label,
                modified=model.parse_timestamp(modified), path=path)
        with self._index_lock:
            self._index = index
            self._cache.clear()

    # -- content blobs ----------------------------------------------------

    def put_content(self, data: bytes) -> str:
        """Store bytes under their digest; returns the content key."""
        key = content_key_for(data)
        path = self.content_path(key)
        if not path.exists():
            self._atomic_write(path, data)
        return key

    def get_content(self, key: str) -> bytes:
        if not CONTENT_KEY_RE.match(key):
            raise ContentNotFound(f"bad content key {key!r}")
        try:
            return self.content_path(key).read_bytes()
        except FileNotFoundError:
            raise ContentNotFound(f"no content {key}")

    def has_content(self, key: str) -> bool:
        return bool(CONTENT_KEY_RE.match(key)) \
            and self.content_path(key).exists()

    def open_content(self, key: str) -> Iterator[bytes]:
        if not self.has_content(key):
            raise ContentNotFound(f"no content {key}")
        def stream(path=self.content_path(key)):
            with open(path, "rb") as handle:
                while True:
                    chunk = handle.read(_READ_CHUNK)
                    if not chunk:
                        return
                    yield chunk
        return stream()

    # -- datastream resolution --------------------------------------------

    def resolve_datastream(self, obj: DigitalObject, dsid: str,
                           as_of: datetime | None = None
                           ) -> tuple[str, Iterator[bytes]]:
        """Bytes of the version selected at ``as_of``: internal blobs are
        read from the content store, external references fetched over HTTP
        and streamed through."""
        ds = obj.datastreams.get(dsid)
        if ds is None:
            raise ComponentNotFound(
                f"no datastream {dsid} in {obj.pid.render()}")
        version = select_version(ds.versions, as_of)
        if version.control is ControlGroup.INTERNAL:
            return version.mime_type, self.open_content(version.location)
        result = self.fetcher.fetch(version.location)
        return version.mime_type, result.chunks

    # -- PID registry -----------------------------------------------------

    def _counter_path(self, namespace: str) -> Path:
        return self.registry_dir / f"{namespace}.counter"

    def _read_counter(self, namespace: str) -> int:
        try:
            return int(self._counter_path(namespace).read_text())
        except FileNotFoundError:
            return 0
        except ValueError as exc:
            raise StorageError(
                f"corrupt registry file for {namespace}") from exc

    def _write_counter(self, namespace: str, value: int):
        self._atomic_write(self._counter_path(namespace),
                           str(value).encode())

    def mint_pid(self, namespace: str) -> Pid:
        """A fresh PID; the counter is persisted before the PID is returned."""
        if not model.NAMESPACE_RE.match(namespace):
            raise ValueError(f"bad namespace {namespace!r}")
        with self._registry_lock:
            serial = self._read_counter(namespace)
            while True:
                serial += 1
                if not self.object_exists(Pid(namespace, serial)):
                    break
            self._write_counter(namespace, serial)
            return Pid(namespace, serial)

    def reserve_pid(self, pid: Pid):
        """Fast-forward the counter past an explicitly chosen PID so minting
        never collides with it and never reissues it after a purge."""
        with self._registry_lock:
            if pid.serial > self._read_counter(pid.namespace):
                self._write_counter(pid.namespace, pid.serial)

    # -- consistency ------------------------------------------------------

    def fsck(self) -> list[str]:
        """Report (never repair) inconsistencies: unreadable objects, index
        drift, missing referenced blobs, orphaned blobs."""
        issues: list[str] = []
        disk: dict[str, Path] = {}
        referenced: set[str] = set()
        for path in sorted(self.objects_dir.glob(
                f"*/*{metsio.FILE_EXTENSION}")):
            try:
                obj = metsio.decode_object(path.read_bytes())
            except StructuralError as exc:
                issues.append(f"invalid object file {path}: "
                              f"{exc.violations[0]}")
                continue
            rendered = obj.pid.render()
            expected = self.object_path(obj.pid)
            if path != expected:
                issues.append(f"object {rendered} stored at {path}, "
                              f"expected {expected}")
            disk[rendered] = path
            for ds in obj.datastreams.values():
                for version in ds.versions:
                    if version.control is ControlGroup.INTERNAL:
                        referenced.add(version.location)
                        if not self.has_content(version.location):
                            issues.append(
                                f"missing blob {version.location} referenced "
                                f"by {rendered}/{version.version_id}")
        index = self.index_snapshot()
        for rendered in sorted(set(disk) - set(index)):
            issues.append(f"object {rendered} on disk but not in index")
        for rendered in sorted(set(index) - set(disk)):
            issues.append(f"object {rendered} in index but not on disk")
        for path in sorted(self.content_dir.glob("*/*")):
            key = path.name
            if not CONTENT_KEY_RE.match(key):
                issues.append(f"foreign file in content store: {path}")
                continue
            if content_key_for(path.read_bytes()) != key:
                issues.append(f"blob {key} fails digest recomputation")
            if key not in referenced:
                issues.append(f"orphan blob {key}")
        return issues
