"""Codec tests: canonical encoding, structural validation, round trips."""

import random

import pytest

from objectrepo.errors import ParseError, StructuralError
from objectrepo.metsio import (
    PROFILE_NS,
    VIOLATION_CODES,
    decode_object,
    encode_object,
    read_header,
    validate_structure,
)
from objectrepo.model import (
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
    parse_timestamp,
)

from objgen import random_object


def ts(text):
    return parse_timestamp(text)


def versioned_image_object():
    """The two-version high-resolution image: DS1.1 current, DS1.0 retained."""
    return DigitalObject(
        pid=Pid("demo", 7),
        kind=ObjectKind.DATA,
        label="High-resolution image",
        created=ts("2002-01-22T06:32:00"),
        modified=ts("2002-08-31T06:32:00"),
        audit_trail=(
            AuditRecord("audit1", AuditAction.ADD_DATASTREAM, "DS1",
                        "staples", ts("2002-01-22T06:32:00"), "initial load"),
            AuditRecord("audit2", AuditAction.MODIFY_DATASTREAM, "DS1",
                        "staples", ts("2002-08-31T06:32:00"), "rescan"),
        ),
        datastreams={"DS1": Datastream(id="DS1", versions=(
            DatastreamVersion("DS1.1", 1, ts("2002-08-31T06:32:00"),
                              "image/jgp", ControlGroup.EXTERNAL_REF,
                              "http://uva.edu/img1.jpg", "audit2"),
            DatastreamVersion("DS1.0", 2, ts("2002-01-22T06:32:00"),
                              "image/jgp", ControlGroup.EXTERNAL_REF,
                              "http://uva.edu/img1a.jpg", "audit1"),
        ))},
    )


VERSIONED_IMAGE_XML = f"""\
<?xml version="1.0" encoding="UTF-8"?>
<mets LABEL="High-resolution image" OBJID="demo:7" TYPE="DATA" xmlns="{PROFILE_NS}">
  <metsHdr CREATEDATE="2002-01-22T06:32:00" LASTMODDATE="2002-08-31T06:32:00"/>
  <amdSec ID="AUDITTRAIL">
    <auditRecord ACTION="ADD_DATASTREAM" COMPONENT="DS1" DATE="2002-01-22T06:32:00" ID="audit1" RESPONSIBLE="staples">initial load</auditRecord>
    <auditRecord ACTION="MODIFY_DATASTREAM" COMPONENT="DS1" DATE="2002-08-31T06:32:00" ID="audit2" RESPONSIBLE="staples">rescan</auditRecord>
  </amdSec>
  <fileSec>
    <fileGrp ID="DATASTREAMS">
      <fileGrp ID="DS1">
        <file ADMID="audit2" CREATED="2002-08-31T06:32:00" ID="DS1.1" MIMETYPE="image/jgp" SEQ="1">
          <FLocat LOCTYPE="URL" href="http://uva.edu/img1.jpg"/>
        </file>
        <file ADMID="audit1" CREATED="2002-01-22T06:32:00" ID="DS1.0" MIMETYPE="image/jgp" SEQ="2">
          <FLocat LOCTYPE="URL" href="http://uva.edu/img1a.jpg"/>
        </file>
      </fileGrp>
    </fileGrp>
  </fileSec>
</mets>
""".encode()


def golden_object():
    """One of everything: property, audit, internal datastream, disseminator."""
    return DigitalObject(
        pid=Pid("demo", 9),
        kind=ObjectKind.DATA,
        label="golden",
        created=ts("2002-01-22T06:32:00"),
        modified=ts("2002-03-01T00:00:00"),
        system_metadata={"owner": "uva"},
        audit_trail=(
            AuditRecord("audit1", AuditAction.ADD_DATASTREAM, "DS1",
                        "staples", ts("2002-01-22T06:32:00"), ""),
            AuditRecord("audit2", AuditAction.ADD_DISSEMINATOR, "DISS1",
                        "staples", ts("2002-03-01T00:00:00"), "wire up"),
        ),
        datastreams={"DS1": Datastream(id="DS1", versions=(
            DatastreamVersion("DS1.0", 1, ts("2002-01-22T06:32:00"),
                              "image/png", ControlGroup.INTERNAL,
                              "abc123", "audit1"),
        ))},
        disseminators={"DISS1": Disseminator(id="DISS1", versions=(
            DisseminatorVersion("DISS1.0", ts("2002-03-01T00:00:00"),
                                Pid("demo", 2), Pid("demo", 3),
                                {"IMAGESRC": "DS1"}, "audit2"),
        ))},
    )


class TestEncode:
    def test_root_carries_rendered_pid(self):
        data = encode_object(versioned_image_object())
        assert b'OBJID="demo:7"' in data

    def test_versioned_datastream_canonical_bytes(self):
        assert encode_object(versioned_image_object()) == VERSIONED_IMAGE_XML

    def test_empty_object_is_header_plus_empty_file_section(self):
        obj = DigitalObject(
            pid=Pid("demo", 1), kind=ObjectKind.DATA, label="",
            created=ts("2002-01-22T06:32:00"),
            modified=ts("2002-01-22T06:32:00"))
        expected = f"""\
<?xml version="1.0" encoding="UTF-8"?>
<mets LABEL="" OBJID="demo:1" TYPE="DATA" xmlns="{PROFILE_NS}">
  <metsHdr CREATEDATE="2002-01-22T06:32:00" LASTMODDATE="2002-01-22T06:32:00"/>
  <fileSec>
    <fileGrp ID="DATASTREAMS"/>
  </fileSec>
</mets>
""".encode()
        assert encode_object(obj) == expected

    def test_deterministic(self):
        obj = golden_object()
        assert encode_object(obj) == encode_object(obj)

    def test_disseminator_sections_pair_with_structmap(self):
        text = encode_object(golden_object()).decode()
        assert 'STRUCTID="DISS1.0.STRUCT"' in text
        assert '<structMap ID="DISS1.0.STRUCT">' in text
        assert '<div ORDER="1" TYPE="IMAGESRC">' in text
        assert '<fptr FILEID="DS1"/>' in text
        assert '<interfaceDef href="demo:2"/>' in text
        assert '<mechanism href="demo:3"/>' in text

    def test_internal_location_uses_repo_scheme(self):
        assert b'href="repo:abc123"' in encode_object(golden_object())


class TestDecode:
    def test_versioned_snippet_decodes_to_model(self):
        obj = decode_object(VERSIONED_IMAGE_XML)
        ds = obj.datastreams["DS1"]
        assert [v.version_id for v in ds.versions] == ["DS1.1", "DS1.0"]
        assert ds.versions[0].created == ts("2002-08-31T06:32:00")
        assert ds.versions[1].created == ts("2002-01-22T06:32:00")
        assert obj == versioned_image_object()

    def test_round_trip_500_random_objects(self):
        rng = random.Random(20020831)
        for _ in range(500):
            obj = random_object(rng)
            data = encode_object(obj)
            decoded = decode_object(data)
            assert decoded == obj
            assert encode_object(decoded) == data

    def test_dangling_fileid_raises_structural_error(self):
        broken = encode_object(golden_object()).replace(
            b'FILEID="DS1"', b'FILEID="DS9"')
        with pytest.raises(StructuralError) as err:
            decode_object(broken)
        assert any(v.code == "DANGLING_FILEID" for v in err.value.violations)

    def test_non_canonical_whitespace_still_decodes(self):
        # Validation is structural; only encoding is canonical.
        loose = VERSIONED_IMAGE_XML.replace(b"  <fileSec>", b"\t<fileSec>")
        assert decode_object(loose) == versioned_image_object()


# One-edit breakers: code -> (old, new) applied to the golden document text.
BREAKERS = {
    "MISSING_OBJID": (' OBJID="demo:9"', ''),
    "BAD_PID": ('OBJID="demo:9"', 'OBJID="Demo 9"'),
    "UNKNOWN_KIND": ('TYPE="DATA"', 'TYPE="OBJECT"'),
    "MISSING_SECTION": (
        '  <metsHdr CREATEDATE="2002-01-22T06:32:00" '
        'LASTMODDATE="2002-03-01T00:00:00">\n'
        '    <property NAME="owner">uva</property>\n'
        '  </metsHdr>\n', ''),
    "UNEXPECTED_ELEMENT": ('  <fileSec>', '  <bogus/>\n  <fileSec>'),
    "MISSING_ATTR": (' RESPONSIBLE="staples">wire up', '>wire up'),
    "BAD_VALUE": ('ACTION="ADD_DATASTREAM"', 'ACTION="TOUCH"'),
    "BAD_ID": (' ID="audit1"', ' ID="audit7"'),
    "BAD_TIMESTAMP": ('CREATED="2002-01-22T06:32:00"', 'CREATED="tomorrow"'),
    "BAD_SEQ_ORDER": ('SEQ="1"', 'SEQ="2"'),
    "DUPLICATE_ID": (' GROUPID="DISS1"', ' GROUPID="DS1"'),
    "DANGLING_FILEID": ('FILEID="DS1"', 'FILEID="DS9"'),
    "DANGLING_ADMID": ('ADMID="audit2" CREATED="2002-03-01T00:00:00"',
                       'ADMID="audit9" CREATED="2002-03-01T00:00:00"'),
    "DANGLING_STRUCTID": ('STRUCTID="DISS1.0.STRUCT"', 'STRUCTID="NOPE"'),
    "BAD_LOCATION": ('href="repo:abc123"', 'href="ftp://host/file"'),
    "BAD_BINDING": ('TYPE="IMAGESRC"', 'TYPE="imagesrc"'),
    "EMPTY_COMPONENT": (
        '        <file ADMID="audit1" CREATED="2002-01-22T06:32:00" '
        'ID="DS1.0" MIMETYPE="image/png" SEQ="1">\n'
        '          <FLocat LOCTYPE="URL" href="repo:abc123"/>\n'
        '        </file>\n', ''),
    "MISSING_RESERVED_DS": ('TYPE="DATA"', 'TYPE="BEHAVIOR_MECHANISM"'),
}


class TestValidateStructure:
    def test_canonical_encoder_output_is_clean(self):
        assert validate_structure(encode_object(golden_object())) == []
        assert validate_structure(VERSIONED_IMAGE_XML) == []

    def test_non_xml_raises_parse_error(self):
        with pytest.raises(ParseError):
            validate_structure(b"<mets")

    def test_every_code_has_a_breaker(self):
        assert set(BREAKERS) == VIOLATION_CODES

    @pytest.mark.parametrize("code", sorted(BREAKERS))
    def test_violation_soundness(self, code):
        # Every code is triggerable by one edit, and the reverse edit heals.
        golden = encode_object(golden_object()).decode()
        old, new = BREAKERS[code]
        assert old in golden, f"breaker for {code} does not apply"
        broken = golden.replace(old, new, 1)
        assert broken != golden
        codes = {v.code for v in validate_structure(broken.encode())}
        assert code in codes, f"expected {code}, got {codes}"
        healed = broken.replace(new, old, 1) if new else golden
        assert validate_structure(healed.encode()) == []

    def test_duplicate_filegrp_ids(self):
        # Two fileGrp elements sharing ID DS1.
        golden = encode_object(golden_object()).decode()
        block = (
            '      <fileGrp ID="DS1">\n'
            '        <file ADMID="audit1" CREATED="2002-01-22T06:32:00" '
            'ID="DS1.0" MIMETYPE="image/png" SEQ="1">\n'
            '          <FLocat LOCTYPE="URL" href="repo:abc123"/>\n'
            '        </file>\n'
            '      </fileGrp>\n')
        assert block in golden
        doubled = golden.replace(block, block + block.replace(
            'ID="DS1.0"', 'ID="DS1.1"').replace(
            'CREATED="2002-01-22T06:32:00"', 'CREATED="2002-01-23T06:32:00"'))
        codes = {v.code for v in validate_structure(doubled.encode())}
        assert "DUPLICATE_ID" in codes

    def test_bad_timestamp_fixture(self):
        broken = encode_object(golden_object()).replace(
            b'CREATED="2002-01-22T06:32:00"', b'CREATED="tomorrow"')
        codes = {v.code for v in validate_structure(broken)}
        assert "BAD_TIMESTAMP" in codes

    def test_violations_carry_locators(self):
        broken = encode_object(golden_object()).replace(
            b'FILEID="DS1"', b'FILEID="DS9"')
        violations = validate_structure(broken)
        assert all(v.locator for v in violations)
        dangling = [v for v in violations if v.code == "DANGLING_FILEID"]
        assert "fptr" in dangling[0].locator


class TestReadHeader:
    def test_reads_root_attributes(self):
        objid, kind, label, modified = read_header(VERSIONED_IMAGE_XML)
        assert objid == "demo:7"
        assert kind == "DATA"
        assert label == "High-resolution image"
        assert modified == "2002-08-31T06:32:00"

    def test_rejects_non_xml(self):
        with pytest.raises(ParseError):
            read_header(b"not xml at all")
