"""Codec between DigitalObject values and their METS-profile XML form.

The profile is self-contained: a fixed element/attribute subset under its
own namespace, validated by rules rather than an external schema. See
``docs/mets-profile.md`` for the grammar and a worked example.

Canonical serialization: XML declaration, two-space indentation,
attributes alphabetized, UTF-8, LF line endings, trailing newline.
``encode_object`` is pure; equal objects yield byte-identical documents.
"""

from __future__ import annotations

import io
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime

from . import model
from .errors import ParseError, StructuralError
from .xmlout import Emitter
from .model import (
    AuditAction,
    AuditRecord,
    ControlGroup,
    Datastream,
    DatastreamVersion,
    DigitalObject,
    Disseminator,
    DisseminatorVersion,
    ObjectKind,
    Pid,
)

PROFILE_NS = "urn:objectrepo:mets-profile:1"
FILE_EXTENSION = ".mets.xml"

# Location scheme for content held by the repository itself.
REPO_SCHEME = "repo:"

#: The closed set of structural violation codes.
VIOLATION_CODES = frozenset({
    "MISSING_OBJID",     # root OBJID attribute absent or empty
    "BAD_PID",           # unparseable persistent identifier
    "UNKNOWN_KIND",      # TYPE is not a known object kind
    "MISSING_SECTION",   # required section or element absent
    "UNEXPECTED_ELEMENT",  # element, attribute, or text the profile forbids
    "MISSING_ATTR",      # required attribute absent
    "BAD_VALUE",         # attribute value outside its vocabulary or shape
    "BAD_ID",            # malformed component, version, or audit id
    "BAD_TIMESTAMP",     # unparseable timestamp
    "BAD_SEQ_ORDER",     # SEQ/ORDER numbering or timestamp ordering broken
    "DUPLICATE_ID",      # one document id claimed twice
    "DANGLING_FILEID",   # fptr FILEID references no datastream
    "DANGLING_ADMID",    # ADMID references no audit record
    "DANGLING_STRUCTID",  # behaviorSec/structMap pairing broken
    "BAD_LOCATION",      # content location is neither repo: nor absolute http(s)
    "BAD_BINDING",       # binding key or definition/mechanism pair invalid
    "EMPTY_COMPONENT",   # component with zero versions
    "MISSING_RESERVED_DS",  # surrogate object without its descriptor datastream
})


@dataclass(frozen=True)
class StructuralViolation:
    code: str
    locator: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.locator}: {self.message}"


def _location_href(version: DatastreamVersion) -> str:
    if version.control is ControlGroup.INTERNAL:
        return REPO_SCHEME + version.location
    return version.location


def encode_object(obj: DigitalObject) -> bytes:
    """Serialize a valid DigitalObject to its canonical METS-profile bytes."""
    model.validate_object(obj)
    out = Emitter()
    out.open(0, "mets", {
        "LABEL": obj.label,
        "OBJID": obj.pid.render(),
        "TYPE": obj.kind.value,
        "xmlns": PROFILE_NS,
    })

    header = {
        "CREATEDATE": model.format_timestamp(obj.created),
        "LASTMODDATE": model.format_timestamp(obj.modified),
    }
    if obj.system_metadata:
        out.open(1, "metsHdr", header)
        for name in sorted(obj.system_metadata):
            out.element(2, "property", {"NAME": name}, obj.system_metadata[name])
        out.close(1, "metsHdr")
    else:
        out.element(1, "metsHdr", header)

    if obj.audit_trail:
        out.open(1, "amdSec", {"ID": "AUDITTRAIL"})
        for rec in obj.audit_trail:
            out.element(2, "auditRecord", {
                "ACTION": rec.action.value,
                "COMPONENT": rec.component_id,
                "DATE": model.format_timestamp(rec.date),
                "ID": rec.id,
                "RESPONSIBLE": rec.responsible,
            }, rec.justification)
        out.close(1, "amdSec")

    out.open(1, "fileSec", {})
    if obj.datastreams:
        out.open(2, "fileGrp", {"ID": "DATASTREAMS"})
        for dsid in sorted(obj.datastreams):
            ds = obj.datastreams[dsid]
            out.open(3, "fileGrp", {"ID": ds.id})
            for version in ds.versions:
                out.open(4, "file", {
                    "ADMID": version.audit_id,
                    "CREATED": model.format_timestamp(version.created),
                    "ID": version.version_id,
                    "MIMETYPE": version.mime_type,
                    "SEQ": str(version.seq),
                })
                out.element(5, "FLocat", {
                    "LOCTYPE": "URL",
                    "href": _location_href(version),
                })
                out.close(4, "file")
            out.close(3, "fileGrp")
        out.close(2, "fileGrp")
    else:
        out.element(2, "fileGrp", {"ID": "DATASTREAMS"})
    out.close(1, "fileSec")

    ordered_versions: list[tuple[str, DisseminatorVersion]] = []
    for dissid in sorted(obj.disseminators):
        for version in obj.disseminators[dissid].versions:
            ordered_versions.append((dissid, version))

    for dissid, version in ordered_versions:
        out.open(1, "behaviorSec", {
            "ADMID": version.audit_id,
            "CREATED": model.format_timestamp(version.created),
            "GROUPID": dissid,
            "ID": version.version_id,
            "STRUCTID": model.structmap_id(version.version_id),
        })
        out.element(2, "interfaceDef", {"href": version.bdef_pid.render()})
        out.element(2, "mechanism", {"href": version.bmech_pid.render()})
        out.close(1, "behaviorSec")

    for dissid, version in ordered_versions:
        map_id = model.structmap_id(version.version_id)
        if version.binding_map:
            out.open(1, "structMap", {"ID": map_id})
            for order, key in enumerate(sorted(version.binding_map), start=1):
                out.open(2, "div", {"ORDER": str(order), "TYPE": key})
                out.element(3, "fptr", {"FILEID": version.binding_map[key]})
                out.close(2, "div")
            out.close(1, "structMap")
        else:
            out.element(1, "structMap", {"ID": map_id})

    out.close(0, "mets")
    return out.tobytes()


def _tag(element: ET.Element) -> str:
    """Local name if the element is in the profile namespace, else raw tag."""
    if element.tag.startswith("{%s}" % PROFILE_NS):
        return element.tag[len(PROFILE_NS) + 2:]
    return element.tag


def parse_document(data: bytes) -> ET.Element:
    try:
        return ET.fromstring(data)
    except ET.ParseError as exc:
        raise ParseError(f"not well-formed XML: {exc}") from exc


class _Validator:
    """Walks a parsed tree collecting profile violations."""

    def __init__(self, root: ET.Element):
        self.root = root
        self.violations: list[StructuralViolation] = []
        self.doc_ids: dict[str, str] = {}
        self.audit_ids: list[str] = []
        self.datastream_ids: set[str] = set()
        self.component_times: list[tuple[str, datetime]] = []
        self.component_admids: list[tuple[str, str]] = []

    def add(self, code: str, locator: str, message: str):
        assert code in VIOLATION_CODES, code
        self.violations.append(StructuralViolation(code, locator, message))

    def claim_id(self, doc_id: str, locator: str):
        if doc_id in self.doc_ids:
            self.add("DUPLICATE_ID", locator,
                     f"id {doc_id!r} already used at {self.doc_ids[doc_id]}")
        else:
            self.doc_ids[doc_id] = locator

    def attrs(self, element: ET.Element, locator: str, required: tuple,
              optional: tuple = ()) -> dict[str, str]:
        present = dict(element.attrib)
        for name in required:
            if name not in present:
                self.add("MISSING_ATTR", locator, f"missing attribute {name}")
        for name in present:
            if name not in required and name not in optional:
                self.add("UNEXPECTED_ELEMENT", locator,
                         f"attribute {name} is not in the profile")
        return present

    def no_stray_text(self, element: ET.Element, locator: str):
        texts = [element.text or ""] + [child.tail or "" for child in element]
        if any(t.strip() for t in texts):
            self.add("UNEXPECTED_ELEMENT", locator, "stray text content")

    def timestamp(self, value: str | None, locator: str) -> datetime | None:
        if value is None:
            return None
        try:
            return model.parse_timestamp(value)
        except ValueError:
            self.add("BAD_TIMESTAMP", locator, f"bad timestamp {value!r}")
            return None

    def run(self) -> list[StructuralViolation]:
        root = self.root
        if _tag(root) != "mets":
            self.add("UNEXPECTED_ELEMENT", "/",
                     f"root element is {root.tag!r}, expected mets in "
                     f"{PROFILE_NS}")
            return self.violations
        attrs = self.attrs(root, "mets", ("LABEL", "TYPE"),
                           optional=("OBJID",))
        objid = attrs.get("OBJID", "")
        if not objid:
            self.add("MISSING_OBJID", "mets/@OBJID",
                     "OBJID attribute absent or empty")
        else:
            try:
                Pid.parse(objid)
            except ValueError:
                self.add("BAD_PID", "mets/@OBJID", f"bad PID {objid!r}")
        kind = None
        if "TYPE" in attrs:
            try:
                kind = ObjectKind(attrs["TYPE"])
            except ValueError:
                self.add("UNKNOWN_KIND", "mets/@TYPE",
                         f"unknown object kind {attrs['TYPE']!r}")
        self.no_stray_text(root, "mets")

        sections: dict[str, list[ET.Element]] = {}
        for child in root:
            sections.setdefault(_tag(child), []).append(child)
        for tag in sections:
            if tag not in ("metsHdr", "amdSec", "fileSec", "behaviorSec",
                           "structMap"):
                self.add("UNEXPECTED_ELEMENT", f"mets/{tag}",
                         f"element {tag} is not in the profile")

        modified = self.check_header(sections.get("metsHdr", []))
        self.check_audit(sections.get("amdSec", []))
        self.check_filesec(sections.get("fileSec", []))
        struct_ids = self.collect_structmap_ids(sections.get("structMap", []))
        referenced = self.check_behavior(sections.get("behaviorSec", []),
                                         struct_ids)
        self.check_structmaps(sections.get("structMap", []), referenced)

        if modified is not None:
            for what, created in self.component_times:
                if created > modified:
                    self.add("BAD_SEQ_ORDER", what,
                             "created after metsHdr/@LASTMODDATE")
        if kind is ObjectKind.BEHAVIOR_DEFINITION \
                and model.METHOD_MAP_DS not in self.datastream_ids:
            self.add("MISSING_RESERVED_DS", "mets",
                     f"behavior definition lacks datastream "
                     f"{model.METHOD_MAP_DS}")
        if kind is ObjectKind.BEHAVIOR_MECHANISM \
                and model.SERVICE_BINDINGS_DS not in self.datastream_ids:
            self.add("MISSING_RESERVED_DS", "mets",
                     f"behavior mechanism lacks datastream "
                     f"{model.SERVICE_BINDINGS_DS}")
        return self.violations

    def check_header(self, headers: list[ET.Element]) -> datetime | None:
        if not headers:
            self.add("MISSING_SECTION", "mets", "metsHdr is required")
            return None
        for extra in headers[1:]:
            self.add("UNEXPECTED_ELEMENT", "mets/metsHdr[2]",
                     "more than one metsHdr")
        header = headers[0]
        locator = "mets/metsHdr"
        attrs = self.attrs(header, locator, ("CREATEDATE", "LASTMODDATE"))
        created = self.timestamp(attrs.get("CREATEDATE"),
                                 locator + "/@CREATEDATE")
        modified = self.timestamp(attrs.get("LASTMODDATE"),
                                  locator + "/@LASTMODDATE")
        if created and modified and modified < created:
            self.add("BAD_SEQ_ORDER", locator,
                     "LASTMODDATE predates CREATEDATE")
        self.no_stray_text(header, locator)
        names = set()
        for child in header:
            if _tag(child) != "property":
                self.add("UNEXPECTED_ELEMENT", f"{locator}/{_tag(child)}",
                         "only property elements belong in metsHdr")
                continue
            ploc = f"{locator}/property"
            pattrs = self.attrs(child, ploc, ("NAME",))
            name = pattrs.get("NAME")
            if name is not None:
                if name in names:
                    self.add("DUPLICATE_ID", ploc,
                             f"property NAME {name!r} repeated")
                names.add(name)
            if len(child):
                self.add("UNEXPECTED_ELEMENT", ploc,
                         "property must not have children")
        return modified

    def check_audit(self, sections: list[ET.Element]):
        for section in sections:
            sec_id = section.get("ID")
            if sec_id != "AUDITTRAIL":
                self.add("UNEXPECTED_ELEMENT", "mets/amdSec",
                         f"amdSec ID must be AUDITTRAIL, got {sec_id!r}")
                continue
            self.claim_id("AUDITTRAIL", "mets/amdSec")
            self.attrs(section, "mets/amdSec", ("ID",))
            self.no_stray_text(section, "mets/amdSec")
            previous_date = None
            for n, child in enumerate(section, start=1):
                locator = f"mets/amdSec/auditRecord[{n}]"
                if _tag(child) != "auditRecord":
                    self.add("UNEXPECTED_ELEMENT", locator,
                             f"unexpected element {_tag(child)}")
                    continue
                attrs = self.attrs(child, locator,
                                   ("ACTION", "COMPONENT", "DATE", "ID",
                                    "RESPONSIBLE"))
                rec_id = attrs.get("ID", "")
                if rec_id:
                    if rec_id != f"audit{n}":
                        self.add("BAD_ID", locator + "/@ID",
                                 f"expected audit{n}, got {rec_id!r}")
                    self.claim_id(rec_id, locator)
                    self.audit_ids.append(rec_id)
                if "ACTION" in attrs:
                    try:
                        AuditAction(attrs["ACTION"])
                    except ValueError:
                        self.add("BAD_VALUE", locator + "/@ACTION",
                                 f"unknown action {attrs['ACTION']!r}")
                date = self.timestamp(attrs.get("DATE"), locator + "/@DATE")
                if date:
                    if previous_date and date < previous_date:
                        self.add("BAD_SEQ_ORDER", locator + "/@DATE",
                                 "audit dates must be non-decreasing")
                    previous_date = date
                    self.component_times.append((locator + "/@DATE", date))
                if len(child):
                    self.add("UNEXPECTED_ELEMENT", locator,
                             "auditRecord must not have children")

    def check_filesec(self, sections: list[ET.Element]):
        if not sections:
            self.add("MISSING_SECTION", "mets", "fileSec is required")
            return
        for extra in sections[1:]:
            self.add("UNEXPECTED_ELEMENT", "mets/fileSec[2]",
                     "more than one fileSec")
        filesec = sections[0]
        self.attrs(filesec, "mets/fileSec", ())
        self.no_stray_text(filesec, "mets/fileSec")
        wrappers = list(filesec)
        if not wrappers:
            self.add("MISSING_SECTION", "mets/fileSec",
                     "fileGrp ID=DATASTREAMS is required")
            return
        wrapper = wrappers[0]
        for extra in wrappers[1:]:
            self.add("UNEXPECTED_ELEMENT", "mets/fileSec",
                     "fileSec holds exactly one fileGrp")
        locator = "mets/fileSec/fileGrp"
        if _tag(wrapper) != "fileGrp" or wrapper.get("ID") != "DATASTREAMS":
            self.add("MISSING_SECTION", locator,
                     "outer fileGrp must carry ID=DATASTREAMS")
            return
        self.claim_id("DATASTREAMS", locator)
        self.attrs(wrapper, locator, ("ID",))
        self.no_stray_text(wrapper, locator)
        for group in wrapper:
            self.check_datastream_group(group)

    def check_datastream_group(self, group: ET.Element):
        dsid = group.get("ID", "")
        locator = f"mets/fileSec/fileGrp/fileGrp[@ID={dsid!r}]"
        if _tag(group) != "fileGrp":
            self.add("UNEXPECTED_ELEMENT", locator,
                     f"unexpected element {_tag(group)}")
            return
        self.attrs(group, locator, ("ID",))
        if not dsid or not model.COMPONENT_ID_RE.match(dsid):
            self.add("BAD_ID", locator, f"bad datastream id {dsid!r}")
        else:
            self.claim_id(dsid, locator)
            self.datastream_ids.add(dsid)
        self.no_stray_text(group, locator)
        files = list(group)
        if not files:
            self.add("EMPTY_COMPONENT", locator, "datastream has no versions")
        previous_created = None
        previous_suffix = None
        for position, element in enumerate(files, start=1):
            floc = f"{locator}/file[{position}]"
            if _tag(element) != "file":
                self.add("UNEXPECTED_ELEMENT", floc,
                         f"unexpected element {_tag(element)}")
                continue
            attrs = self.attrs(element, floc,
                               ("ADMID", "CREATED", "ID", "MIMETYPE", "SEQ"))
            version_id = attrs.get("ID", "")
            suffix = None
            if version_id:
                self.claim_id(version_id, floc)
                suffix = model.version_suffix(dsid, version_id) if dsid else None
                if dsid and suffix is None:
                    self.add("BAD_ID", floc + "/@ID",
                             f"version id {version_id!r} is not "
                             f"'{dsid}.<n>'")
            if "SEQ" in attrs and attrs["SEQ"] != str(position):
                self.add("BAD_SEQ_ORDER", floc + "/@SEQ",
                         f"SEQ {attrs['SEQ']!r} at position {position}")
            created = self.timestamp(attrs.get("CREATED"), floc + "/@CREATED")
            if created:
                if previous_created is not None and created >= previous_created:
                    self.add("BAD_SEQ_ORDER", floc + "/@CREATED",
                             "version timestamps must be strictly decreasing")
                previous_created = created
                self.component_times.append((floc + "/@CREATED", created))
            if suffix is not None:
                if previous_suffix is not None and suffix >= previous_suffix:
                    self.add("BAD_SEQ_ORDER", floc + "/@ID",
                             "version numbers must decrease newest-first")
                previous_suffix = suffix
            if "MIMETYPE" in attrs and \
                    not re.match(r"^[!-~]+/[!-~]+$", attrs["MIMETYPE"]):
                self.add("BAD_VALUE", floc + "/@MIMETYPE",
                         f"bad media type {attrs['MIMETYPE']!r}")
            if "ADMID" in attrs:
                self.component_admids.append((attrs["ADMID"], floc + "/@ADMID"))
            self.no_stray_text(element, floc)
            locats = list(element)
            if len(locats) != 1 or _tag(locats[0]) != "FLocat":
                self.add("MISSING_SECTION", floc,
                         "file holds exactly one FLocat")
                continue
            flocat = locats[0]
            lloc = floc + "/FLocat"
            lattrs = self.attrs(flocat, lloc, ("LOCTYPE", "href"))
            if lattrs.get("LOCTYPE") not in (None, "URL"):
                self.add("BAD_VALUE", lloc + "/@LOCTYPE",
                         f"LOCTYPE must be URL, got {lattrs['LOCTYPE']!r}")
            href = lattrs.get("href")
            if href is not None and not (
                    href.startswith(("http://", "https://"))
                    or (href.startswith(REPO_SCHEME)
                        and len(href) > len(REPO_SCHEME))):
                self.add("BAD_LOCATION", lloc + "/@href",
                         f"location {href!r} is neither an absolute http(s) "
                         f"URL nor repo:<content-key>")
            if len(flocat):
                self.add("UNEXPECTED_ELEMENT", lloc,
                         "FLocat must not have children")

    def collect_structmap_ids(self, maps: list[ET.Element]) -> set[str]:
        ids = set()
        for n, element in enumerate(maps, start=1):
            map_id = element.get("ID")
            if map_id:
                ids.add(map_id)
        return ids

    def check_behavior(self, sections: list[ET.Element],
                       struct_ids: set[str]) -> dict[str, str]:
        referenced: dict[str, str] = {}
        groups: dict[str, tuple[datetime | None, int | None]] = {}
        group_ids_claimed: set[str] = set()
        for n, section in enumerate(sections, start=1):
            version_id = section.get("ID", "")
            locator = f"mets/behaviorSec[@ID={version_id!r}]"
            attrs = self.attrs(section, locator,
                               ("ADMID", "CREATED", "GROUPID", "ID",
                                "STRUCTID"))
            group_id = attrs.get("GROUPID", "")
            if group_id and not model.COMPONENT_ID_RE.match(group_id):
                self.add("BAD_ID", locator + "/@GROUPID",
                         f"bad disseminator id {group_id!r}")
            elif group_id and group_id not in group_ids_claimed:
                self.claim_id(group_id, locator)
                group_ids_claimed.add(group_id)
            suffix = None
            if version_id:
                self.claim_id(version_id, locator)
                if group_id:
                    suffix = model.version_suffix(group_id, version_id)
                    if suffix is None:
                        self.add("BAD_ID", locator + "/@ID",
                                 f"version id {version_id!r} is not "
                                 f"'{group_id}.<n>'")
            created = self.timestamp(attrs.get("CREATED"),
                                     locator + "/@CREATED")
            if created:
                self.component_times.append((locator + "/@CREATED", created))
            if group_id:
                prev_created, prev_suffix = groups.get(group_id, (None, None))
                if created and prev_created and created >= prev_created:
                    self.add("BAD_SEQ_ORDER", locator + "/@CREATED",
                             "version timestamps must be strictly decreasing")
                if suffix is not None and prev_suffix is not None \
                        and suffix >= prev_suffix:
                    self.add("BAD_SEQ_ORDER", locator + "/@ID",
                             "version numbers must decrease newest-first")
                groups[group_id] = (created or prev_created,
                                    suffix if suffix is not None
                                    else prev_suffix)
            if "ADMID" in attrs:
                self.component_admids.append(
                    (attrs["ADMID"], locator + "/@ADMID"))
            struct_id = attrs.get("STRUCTID")
            if struct_id is not None:
                if struct_id not in struct_ids:
                    self.add("DANGLING_STRUCTID", locator + "/@STRUCTID",
                             f"no structMap with ID {struct_id!r}")
                elif struct_id in referenced.values():
                    self.add("DANGLING_STRUCTID", locator + "/@STRUCTID",
                             f"structMap {struct_id!r} referenced twice")
                elif version_id:
                    referenced[version_id] = struct_id
            self.no_stray_text(section, locator)
            children = {_tag(c): c for c in section}
            for tag in ("interfaceDef", "mechanism"):
                if tag not in children:
                    self.add("MISSING_SECTION", locator,
                             f"behaviorSec requires {tag}")
            hrefs = {}
            for child in section:
                tag = _tag(child)
                cloc = f"{locator}/{tag}"
                if tag not in ("interfaceDef", "mechanism"):
                    self.add("UNEXPECTED_ELEMENT", cloc,
                             f"unexpected element {tag}")
                    continue
                cattrs = self.attrs(child, cloc, ("href",))
                href = cattrs.get("href", "")
                if href:
                    try:
                        hrefs[tag] = Pid.parse(href)
                    except ValueError:
                        self.add("BAD_PID", cloc + "/@href",
                                 f"bad PID {href!r}")
            if "interfaceDef" in hrefs and "mechanism" in hrefs \
                    and hrefs["interfaceDef"] == hrefs["mechanism"]:
                self.add("BAD_BINDING", locator,
                         "definition and mechanism are the same object")
        return referenced

    def check_structmaps(self, maps: list[ET.Element],
                         referenced: dict[str, str]):
        used = set(referenced.values())
        for element in maps:
            map_id = element.get("ID", "")
            locator = f"mets/structMap[@ID={map_id!r}]"
            self.attrs(element, locator, ("ID",))
            if map_id:
                self.claim_id(map_id, locator)
            if map_id and map_id not in used:
                self.add("DANGLING_STRUCTID", locator,
                         "structMap referenced by no behaviorSec")
            self.no_stray_text(element, locator)
            keys = set()
            for position, div in enumerate(element, start=1):
                dloc = f"{locator}/div[{position}]"
                if _tag(div) != "div":
                    self.add("UNEXPECTED_ELEMENT", dloc,
                             f"unexpected element {_tag(div)}")
                    continue
                dattrs = self.attrs(div, dloc, ("ORDER", "TYPE"))
                key = dattrs.get("TYPE", "")
                if key:
                    if not model.BINDING_KEY_RE.match(key):
                        self.add("BAD_BINDING", dloc + "/@TYPE",
                                 f"bad binding key {key!r}")
                    if key in keys:
                        self.add("DUPLICATE_ID", dloc + "/@TYPE",
                                 f"binding key {key!r} repeated")
                    keys.add(key)
                if "ORDER" in dattrs and dattrs["ORDER"] != str(position):
                    self.add("BAD_SEQ_ORDER", dloc + "/@ORDER",
                             f"ORDER {dattrs['ORDER']!r} at position "
                             f"{position}")
                self.no_stray_text(div, dloc)
                fptrs = list(div)
                if len(fptrs) != 1 or _tag(fptrs[0]) != "fptr":
                    self.add("MISSING_SECTION", dloc,
                             "div holds exactly one fptr")
                    continue
                fattrs = self.attrs(fptrs[0], dloc + "/fptr", ("FILEID",))
                fileid = fattrs.get("FILEID")
                if fileid is not None and fileid not in self.datastream_ids:
                    self.add("DANGLING_FILEID", dloc + "/fptr/@FILEID",
                             f"FILEID {fileid!r} names no datastream")
                if len(fptrs[0]):
                    self.add("UNEXPECTED_ELEMENT", dloc + "/fptr",
                             "fptr must not have children")

    def finish_admids(self):
        known = set(self.audit_ids)
        for admid, locator in self.component_admids:
            if admid not in known:
                self.add("DANGLING_ADMID", locator,
                         f"ADMID {admid!r} names no audit record")


def validate_tree(root: ET.Element) -> list[StructuralViolation]:
    validator = _Validator(root)
    validator.run()
    validator.finish_admids()
    return validator.violations


def validate_structure(data: bytes) -> list[StructuralViolation]:
    """All profile violations in the document; raises ParseError if not XML."""
    return validate_tree(parse_document(data))


def decode_tree(root: ET.Element) -> DigitalObject:
    def children(element, tag):
        return [c for c in element if _tag(c) == tag]

    pid = Pid.parse(root.get("OBJID"))
    kind = ObjectKind(root.get("TYPE"))
    label = root.get("LABEL")

    header = children(root, "metsHdr")[0]
    created = model.parse_timestamp(header.get("CREATEDATE"))
    modified = model.parse_timestamp(header.get("LASTMODDATE"))
    system_metadata = {
        prop.get("NAME"): prop.text or ""
        for prop in children(header, "property")
    }

    audit_trail = []
    for section in children(root, "amdSec"):
        for rec in children(section, "auditRecord"):
            audit_trail.append(AuditRecord(
                id=rec.get("ID"),
                action=AuditAction(rec.get("ACTION")),
                component_id=rec.get("COMPONENT"),
                responsible=rec.get("RESPONSIBLE"),
                date=model.parse_timestamp(rec.get("DATE")),
                justification=rec.text or "",
            ))

    datastreams = {}
    filesec = children(root, "fileSec")[0]
    wrapper = list(filesec)[0] if len(filesec) else None
    if wrapper is not None:
        for group in children(wrapper, "fileGrp"):
            dsid = group.get("ID")
            versions = []
            for position, element in enumerate(children(group, "file"),
                                               start=1):
                href = list(element)[0].get("href")
                if href.startswith(REPO_SCHEME):
                    control = ControlGroup.INTERNAL
                    location = href[len(REPO_SCHEME):]
                else:
                    control = ControlGroup.EXTERNAL_REF
                    location = href
                versions.append(DatastreamVersion(
                    version_id=element.get("ID"),
                    seq=position,
                    created=model.parse_timestamp(element.get("CREATED")),
                    mime_type=element.get("MIMETYPE"),
                    control=control,
                    location=location,
                    audit_id=element.get("ADMID"),
                ))
            datastreams[dsid] = Datastream(id=dsid, versions=tuple(versions))

    structmaps = {}
    for element in children(root, "structMap"):
        binding_map = {}
        for div in children(element, "div"):
            binding_map[div.get("TYPE")] = list(div)[0].get("FILEID")
        structmaps[element.get("ID")] = binding_map

    disseminators: dict[str, list[DisseminatorVersion]] = {}
    for section in children(root, "behaviorSec"):
        group_id = section.get("GROUPID")
        refs = {_tag(c): c.get("href") for c in section}
        version = DisseminatorVersion(
            version_id=section.get("ID"),
            created=model.parse_timestamp(section.get("CREATED")),
            bdef_pid=Pid.parse(refs["interfaceDef"]),
            bmech_pid=Pid.parse(refs["mechanism"]),
            binding_map=structmaps[section.get("STRUCTID")],
            audit_id=section.get("ADMID"),
        )
        disseminators.setdefault(group_id, []).append(version)

    obj = DigitalObject(
        pid=pid,
        kind=kind,
        label=label,
        created=created,
        modified=modified,
        system_metadata=system_metadata,
        datastreams=datastreams,
        disseminators={
            dissid: Disseminator(id=dissid, versions=tuple(versions))
            for dissid, versions in disseminators.items()
        },
        audit_trail=tuple(audit_trail),
    )
    model.validate_object(obj)
    return obj


def decode_object(data: bytes) -> DigitalObject:
    """Parse, validate, and decode a METS-profile document.

    Raises ParseError for non-XML input and StructuralError carrying the
    violation list when the document breaks the profile.
    """
    root = parse_document(data)
    violations = validate_tree(root)
    if violations:
        raise StructuralError(violations)
    return decode_tree(root)


def read_header(data: bytes) -> tuple[str, str, str, str]:
    """(OBJID, TYPE, LABEL, LASTMODDATE) without validating the whole body.

    Cheap scan used for index rebuilds; full validation happens on decode.
    """
    root_attrs: dict[str, str] = {}
    try:
        for event, element in ET.iterparse(io.BytesIO(data), events=("start",)):
            if not root_attrs:
                if _tag(element) != "mets":
                    raise ParseError(f"root element is {element.tag!r}")
                root_attrs = dict(element.attrib)
            elif _tag(element) == "metsHdr":
                return (root_attrs.get("OBJID", ""), root_attrs.get("TYPE", ""),
                        root_attrs.get("LABEL", ""),
                        element.get("LASTMODDATE", ""))
    except ET.ParseError as exc:
        raise ParseError(f"not well-formed XML: {exc}") from exc
    raise ParseError("document has no metsHdr")
