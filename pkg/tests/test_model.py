"""Tests for the domain model: version selection, audit construction, PIDs."""

from dataclasses import replace
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, strategies as st

from objectrepo.errors import InvalidObject, NoVersionAtTime
from objectrepo.model import (
    AuditAction,
    ControlGroup,
    Datastream,
    DatastreamVersion,
    DigitalObject,
    Disseminator,
    DisseminatorVersion,
    ObjectKind,
    Pid,
    append_audit,
    format_timestamp,
    next_version_id,
    parse_timestamp,
    select_version,
    validate_object,
)


def ts(text):
    return parse_timestamp(text)


def ds_version(version_id, created, seq=1, location="http://uva.edu/img1.jpg"):
    return DatastreamVersion(
        version_id=version_id,
        seq=seq,
        created=ts(created),
        mime_type="image/jgp",
        control=ControlGroup.EXTERNAL_REF,
        location=location,
        audit_id="audit1",
    )


# The two-version list from the versioning example: DS1.1 newest.
DS1_VERSIONS = (
    ds_version("DS1.1", "2002-08-31T06:32:00", seq=1),
    ds_version("DS1.0", "2002-01-22T06:32:00", seq=2,
               location="http://uva.edu/img1a.jpg"),
)


class TestSelectVersion:
    def test_no_as_of_returns_newest(self):
        assert select_version(DS1_VERSIONS).version_id == "DS1.1"

    def test_as_of_between_versions_returns_older(self):
        picked = select_version(DS1_VERSIONS, ts("2002-05-01T00:00:00"))
        assert picked.version_id == "DS1.0"

    def test_as_of_before_all_versions_raises(self):
        with pytest.raises(NoVersionAtTime):
            select_version(DS1_VERSIONS, ts("2001-12-31T23:59:59"))

    def test_boundary_is_inclusive(self):
        newest = DS1_VERSIONS[0]
        assert select_version(DS1_VERSIONS, newest.created) is newest
        oldest = DS1_VERSIONS[1]
        assert select_version(DS1_VERSIONS, oldest.created) is oldest

    @given(
        n=st.integers(min_value=1, max_value=8),
        offsets=st.lists(st.integers(min_value=0, max_value=10**6),
                         min_size=9, max_size=9),
        probe=st.integers(min_value=-10, max_value=10**6 + 10),
    )
    def test_matches_brute_force_scan(self, n, offsets, probe):
        # Build a strictly-decreasing newest-first list from random gaps.
        base = datetime(2002, 1, 1, tzinfo=timezone.utc)
        instants = sorted({base + timedelta(seconds=o) for o in offsets[:n]},
                          reverse=True)
        versions = [
            ds_version(f"DS1.{len(instants) - 1 - i}", format_timestamp(t),
                       seq=i + 1)
            for i, t in enumerate(instants)
        ]
        as_of = base + timedelta(seconds=probe)

        eligible = [v for v in versions if v.created <= as_of]
        if not eligible:
            with pytest.raises(NoVersionAtTime):
                select_version(versions, as_of)
        else:
            picked = select_version(versions, as_of)
            assert picked.created <= as_of
            # No eligible version is newer than the pick.
            assert picked.created == max(v.created for v in eligible)


class TestNextVersionId:
    def test_two_existing_versions(self):
        ds = Datastream(id="DS1", versions=DS1_VERSIONS)
        assert next_version_id(ds) == "DS1.2"

    def test_fresh_component(self):
        assert next_version_id(Datastream(id="DS9", versions=())) == "DS9.0"

    def test_single_disseminator_version(self):
        diss = Disseminator(
            id="DISS1",
            versions=(DisseminatorVersion(
                version_id="DISS1.0",
                created=ts("2002-01-22T06:32:00"),
                bdef_pid=Pid("demo", 1),
                bmech_pid=Pid("demo", 2),
                binding_map={},
                audit_id="audit1",
            ),),
        )
        assert next_version_id(diss) == "DISS1.1"

    def test_max_suffix_scan_oracle(self):
        # Oracle: enumerate suffixes by hand, take max + 1.
        for suffixes in ([0], [0, 1], [0, 1, 2], [0, 2, 7]):
            versions = tuple(
                ds_version(f"DS1.{n}", format_timestamp(
                    datetime(2002, 1, 1, tzinfo=timezone.utc)
                    + timedelta(days=n)), seq=i + 1)
                for i, n in enumerate(sorted(suffixes, reverse=True))
            )
            ds = Datastream(id="DS1", versions=versions)
            assert next_version_id(ds) == f"DS1.{max(suffixes) + 1}"

    def test_dotted_component_id(self):
        ds = Datastream(id="DS1.A", versions=(
            ds_version("DS1.A.0", "2002-01-22T06:32:00"),))
        assert next_version_id(ds) == "DS1.A.1"


def fresh_object(**overrides):
    fields = dict(
        pid=Pid("demo", 1),
        kind=ObjectKind.DATA,
        label="test object",
        created=ts("2002-01-22T06:32:00"),
        modified=ts("2002-01-22T06:32:00"),
    )
    fields.update(overrides)
    return DigitalObject(**fields)


class TestAppendAudit:
    def test_first_record_gets_audit1(self):
        obj, record = append_audit(
            fresh_object(), AuditAction.INGEST, "", "staples", "initial load",
            ts("2002-01-22T06:32:00"))
        assert record.id == "audit1"
        assert obj.audit_trail == (record,)
        assert obj.modified == ts("2002-01-22T06:32:00")

    def test_second_datastream_version_references_audit2(self):
        # Replays the versioning example: the newer file carries ADMID audit2.
        obj, first = append_audit(
            fresh_object(), AuditAction.ADD_DATASTREAM, "DS1", "staples", "",
            ts("2002-01-22T06:32:00"))
        obj, second = append_audit(
            obj, AuditAction.MODIFY_DATASTREAM, "DS1", "staples", "",
            ts("2002-08-31T06:32:00"))
        assert second.id == "audit2"
        ds = Datastream(id="DS1", versions=(
            replace(DS1_VERSIONS[0], audit_id=second.id),
            replace(DS1_VERSIONS[1], audit_id=first.id),
        ))
        obj = replace(obj, datastreams={"DS1": ds})
        validate_object(obj)
        assert obj.datastreams["DS1"].versions[0].audit_id == "audit2"

    def test_successive_ids_and_dates_increase(self):
        obj = fresh_object()
        now1 = ts("2002-01-22T06:32:00")
        now2 = ts("2002-01-22T06:32:01")
        obj, r1 = append_audit(obj, AuditAction.INGEST, "", "a", "", now1)
        obj, r2 = append_audit(obj, AuditAction.ADD_DATASTREAM, "DS1", "a", "", now2)
        assert [r.id for r in obj.audit_trail] == ["audit1", "audit2"]
        assert r1.date < r2.date


class TestPid:
    def test_render(self):
        assert Pid("demo", 1).render() == "demo:1"

    def test_parse(self):
        assert Pid.parse("uva-lib:4042") == Pid("uva-lib", 4042)

    @pytest.mark.parametrize("bad", [
        "demo", "Demo:1", "demo:01", "demo:-1", "demo:1.5", ":1", "demo:",
        "demo:1:2", "0demo:1", "demo :1",
    ])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            Pid.parse(bad)

    @given(st.from_regex(r"[a-z][a-z0-9-]{0,31}", fullmatch=True),
           st.integers(min_value=0, max_value=10**9))
    def test_round_trip(self, namespace, serial):
        pid = Pid(namespace, serial)
        assert Pid.parse(pid.render()) == pid


class TestValidateObject:
    def test_accepts_valid_object(self):
        obj, rec = append_audit(fresh_object(), AuditAction.ADD_DATASTREAM,
                                "DS1", "staples", "", ts("2002-08-31T06:32:00"))
        obj = replace(obj, datastreams={
            "DS1": Datastream(id="DS1", versions=DS1_VERSIONS)})
        validate_object(obj)

    def test_rejects_relative_external_url(self):
        obj, _ = append_audit(fresh_object(), AuditAction.ADD_DATASTREAM,
                              "DS1", "s", "", ts("2002-08-31T06:32:00"))
        bad = replace(DS1_VERSIONS[0], location="img1.jpg")
        obj = replace(obj, datastreams={
            "DS1": Datastream(id="DS1", versions=(bad,))})
        with pytest.raises(InvalidObject):
            validate_object(obj)

    def test_rejects_equal_version_timestamps(self):
        obj, _ = append_audit(fresh_object(), AuditAction.ADD_DATASTREAM,
                              "DS1", "s", "", ts("2002-08-31T06:32:00"))
        same = ds_version("DS1.1", "2002-01-22T06:32:00", seq=1)
        older = ds_version("DS1.0", "2002-01-22T06:32:00", seq=2)
        obj = replace(obj, datastreams={
            "DS1": Datastream(id="DS1", versions=(same, older))})
        with pytest.raises(InvalidObject):
            validate_object(obj)

    def test_rejects_dangling_audit_reference(self):
        obj = fresh_object(modified=ts("2002-08-31T06:32:00"))
        obj = replace(obj, datastreams={
            "DS1": Datastream(id="DS1", versions=DS1_VERSIONS)})
        with pytest.raises(InvalidObject):
            validate_object(obj)

    def test_rejects_binding_to_missing_datastream(self):
        obj, _ = append_audit(fresh_object(), AuditAction.ADD_DISSEMINATOR,
                              "DISS1", "s", "", ts("2002-08-31T06:32:00"))
        diss = Disseminator(id="DISS1", versions=(DisseminatorVersion(
            version_id="DISS1.0",
            created=ts("2002-08-31T06:32:00"),
            bdef_pid=Pid("demo", 2),
            bmech_pid=Pid("demo", 3),
            binding_map={"IMAGESRC": "DS1"},
            audit_id="audit1",
        ),))
        obj = replace(obj, disseminators={"DISS1": diss})
        with pytest.raises(InvalidObject):
            validate_object(obj)

    def test_rejects_bdef_equal_bmech(self):
        obj, _ = append_audit(fresh_object(), AuditAction.ADD_DISSEMINATOR,
                              "DISS1", "s", "", ts("2002-08-31T06:32:00"))
        diss = Disseminator(id="DISS1", versions=(DisseminatorVersion(
            version_id="DISS1.0",
            created=ts("2002-08-31T06:32:00"),
            bdef_pid=Pid("demo", 2),
            bmech_pid=Pid("demo", 2),
            binding_map={},
            audit_id="audit1",
        ),))
        obj = replace(obj, disseminators={"DISS1": diss})
        with pytest.raises(InvalidObject):
            validate_object(obj)

    def test_rejects_surrogate_without_reserved_datastream(self):
        obj = fresh_object(kind=ObjectKind.BEHAVIOR_DEFINITION)
        with pytest.raises(InvalidObject):
            validate_object(obj)

    def test_rejects_component_id_colliding_with_version_id(self):
        obj, _ = append_audit(fresh_object(), AuditAction.ADD_DATASTREAM,
                              "DS1", "s", "", ts("2002-08-31T06:32:00"))
        clash = Datastream(id="DS1.1", versions=(
            ds_version("DS1.1.0", "2002-01-22T06:32:00"),))
        obj = replace(obj, datastreams={
            "DS1": Datastream(id="DS1", versions=DS1_VERSIONS),
            "DS1.1": clash,
        })
        with pytest.raises(InvalidObject):
            validate_object(obj)


class TestTimestamps:
    def test_round_trip(self):
        text = "2002-08-31T06:32:00"
        assert format_timestamp(parse_timestamp(text)) == text

    @pytest.mark.parametrize("bad", [
        "2002-08-31", "2002-08-31T06:32:00Z", "2002-08-31 06:32:00",
        "2002-08-31T06:32:00.5", "tomorrow", "2002-13-01T00:00:00",
    ])
    def test_rejects_other_forms(self, bad):
        with pytest.raises(ValueError):
            parse_timestamp(bad)
