import json

import numpy as np
import pytest

from gridrestore import (
    Breaker,
    Bus,
    Feeder,
    FeederParseError,
    FeederReferenceError,
    FeederValidationError,
    Generator,
    Line,
    LoadPoint,
    MicrogridPartition,
    builtin_feeder,
    feeder_hash,
    load_feeder,
    serialize_feeder,
    validate_feeder,
)
from reference import random_radial_feeder


def test_ieee13_aggregates(ieee13):
    assert ieee13.total_load_kw() == 3461.0
    assert ieee13.total_capacity_kw() == 2600.0
    assert ieee13.n_breakers == 9
    assert len(ieee13.buses) == 13
    assert [len(g) for g in ieee13.partition.assignments] == [4, 5]
    mg1 = [ieee13.loads[i].p_rated for i in range(4)]
    mg2 = [ieee13.loads[i].p_rated for i in range(4, 9)]
    assert mg1 == [230.0, 170.0, 400.0, 200.0]
    assert mg2 == [170.0, 128.0, 1150.0, 170.0, 843.0]


def test_ieee123_aggregates(ieee123):
    assert ieee123.total_load_kw() == 3025.0
    assert ieee123.total_capacity_kw() == 2400.0
    assert ieee123.n_breakers == 26
    assert len(ieee123.buses) == 123
    assert [len(g) for g in ieee123.partition.assignments] == [10, 5, 3, 3, 5]


@pytest.mark.parametrize("name", ["ieee13", "ieee123"])
def test_builtins_validate_clean(name):
    assert validate_feeder(builtin_feeder(name)) == []


def test_unknown_builtin_name():
    with pytest.raises(KeyError, match="ieee8500"):
        builtin_feeder("ieee8500")


def test_builtin_partition_covers_each_breaker_once(ieee13, ieee123):
    for feeder in (ieee13, ieee123):
        counts = {b.id: 0 for b in feeder.breakers}
        for group in feeder.partition.assignments:
            for bid in group:
                counts[bid] += 1
        assert all(c == 1 for c in counts.values())


@pytest.mark.parametrize("name", ["ieee13", "ieee123"])
def test_round_trip_builtin(name):
    feeder = builtin_feeder(name)
    again = load_feeder(serialize_feeder(feeder))
    assert again == feeder


def test_round_trip_random_feeders():
    rng = np.random.default_rng(11)
    for _ in range(10):
        feeder = random_radial_feeder(rng)
        assert validate_feeder(feeder) == []
        assert load_feeder(serialize_feeder(feeder).encode()) == feeder


def test_load_feeder_accepts_stream(tmp_path, ieee13):
    path = tmp_path / "f.json"
    path.write_text(serialize_feeder(ieee13))
    with open(path, "rb") as fh:
        assert load_feeder(fh) == ieee13


def test_dangling_bus_reference():
    doc = json.loads(serialize_feeder(builtin_feeder("ieee13")))
    doc["loads"][0]["bus_id"] = "b99"
    with pytest.raises(FeederReferenceError, match="b99"):
        load_feeder(json.dumps(doc))


def test_zero_loads_single_generator_is_valid():
    doc = {
        "format_version": 1,
        "name": "empty",
        "s_base_kva": 1000.0,
        "v_base_kv": 4.16,
        "buses": [{"id": "a"}],
        "lines": [],
        "breakers": [],
        "loads": [],
        "generators": [
            {"id": "g", "bus_id": "a", "p_min": 0.0, "p_max": 100.0,
             "q_min": 0.0, "q_max": 50.0}
        ],
        "partition": {},
    }
    feeder = load_feeder(json.dumps(doc))
    assert feeder.total_load_kw() == 0.0


def test_uncovered_breaker_violation(ieee13):
    partition = MicrogridPartition(
        (ieee13.partition.assignments[0], ieee13.partition.assignments[1][:-4])
    )
    broken = Feeder(**{**ieee13.__dict__, "partition": partition})
    violations = validate_feeder(broken)
    assert any("uncovered breaker" in v for v in violations)


def test_cycle_is_non_radial(ieee13):
    extra = Line("tie", "mg1", "mg1b", 0.001, 0.002, 500.0)
    broken = Feeder(**{**ieee13.__dict__, "lines": ieee13.lines + (extra,)})
    assert any("non-radial topology" in v for v in validate_feeder(broken))


def test_misc_violations(ieee13):
    bad_weight = LoadPoint("ldx", "mg1", 10.0, 3.0, 1.5, "cb1")
    broken = Feeder(**{**ieee13.__dict__, "loads": ieee13.loads + (bad_weight,)})
    assert any("weight outside" in v for v in validate_feeder(broken))

    dup = Feeder(**{**ieee13.__dict__, "buses": ieee13.buses + (Bus("mg1"),)})
    assert any("duplicate bus" in v for v in validate_feeder(dup))

    inverted = Generator("gx", "mg1", 10.0, 5.0, 0.0, 0.0)
    broken = Feeder(
        **{**ieee13.__dict__, "generators": ieee13.generators + (inverted,)}
    )
    assert any("inverted limits" in v for v in validate_feeder(broken))


def test_unreachable_load_detected():
    feeder = Feeder(
        name="island",
        s_base_kva=1000.0,
        v_base_kv=4.16,
        buses=(Bus("a"), Bus("b"), Bus("c")),
        lines=(Line("l1", "a", "b", 0.001, 0.002, 500.0),),
        breakers=(Breaker("cb1", "l1", 0),),
        loads=(LoadPoint("ld1", "c", 50.0, 15.0, 1.0, "cb1"),),
        generators=(Generator("g", "a", 0.0, 100.0, 0.0, 50.0),),
        partition=MicrogridPartition((("cb1",),)),
    )
    assert any("unreachable" in v for v in validate_feeder(feeder))


def test_parse_errors():
    with pytest.raises(FeederParseError):
        load_feeder(b"not json at all {{{")
    with pytest.raises(FeederParseError, match="format_version"):
        load_feeder(json.dumps({"buses": []}))
    with pytest.raises(FeederParseError, match="format_version"):
        load_feeder(json.dumps({"format_version": 99}))


def test_validation_error_lists_violations(ieee13):
    doc = json.loads(serialize_feeder(ieee13))
    doc["loads"][0]["weight"] = 2.0
    with pytest.raises(FeederValidationError) as err:
        load_feeder(json.dumps(doc))
    assert any("weight outside" in v for v in err.value.violations)


def test_feeder_hash_tracks_content(ieee13):
    h = feeder_hash(ieee13)
    assert h == feeder_hash(builtin_feeder("ieee13"))
    assert h != feeder_hash(builtin_feeder("ieee123"))
