"""Round-trip stability of the JSON document formats."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from goldsub.errors import UsageError
from goldsub.problems import get_problem
from goldsub.serialize import (
    CERTIFICATE_SCHEMA,
    MANIFEST_SCHEMA,
    TRACE_SCHEMA,
    UNDEFINED,
    certificate_data,
    certificate_from_data,
    config_from_data,
    dumps,
    manifest_data,
    read_json,
    to_jsonable,
    trace_data,
    trace_from_data,
    write_json,
)
from goldsub.solver import SolverConfig, solve


def read_json_text(text):
    import json

    return json.loads(text)


@pytest.fixture(scope="module")
def run():
    record = get_problem("ball-linear")
    config = SolverConfig(delta=0.05, target_eps=0.05, seed=7)
    cert, trace = solve(record.spec, config, record.start)
    return record, config, cert, trace


def test_to_jsonable_handles_numpy():
    data = to_jsonable({
        "arr": np.array([1.0, 2.5]),
        "scalar": np.float64(0.25),
        "count": np.int64(3),
        "flag": np.bool_(True),
        "pair": (1, 2),
    })
    assert data == {"arr": [1.0, 2.5], "scalar": 0.25, "count": 3,
                    "flag": True, "pair": [1, 2]}
    assert all(type(v) is float for v in data["arr"])


def test_dumps_is_sorted_and_newline_terminated():
    text = dumps({"b": 1, "a": 2})
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert dumps({"a": 2, "b": 1}) == text


def test_dumps_rejects_nan():
    with pytest.raises(ValueError):
        dumps({"x": math.nan})
    with pytest.raises(ValueError):
        dumps({"x": math.inf})


def test_write_and_read_round_trip(tmp_path):
    path = tmp_path / "doc.json"
    write_json(str(path), {"k": [1.0, 2.0], "n": None})
    assert read_json(str(path)) == {"k": [1.0, 2.0], "n": None}
    assert path.read_text() == dumps({"k": [1.0, 2.0], "n": None})
    leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
    assert leftovers == []


def test_manifest_created_stamp_is_opt_in(run):
    record, config, _, _ = run
    plain = manifest_data(record.name, record.params, config, "1.0")
    assert plain["schema"] == MANIFEST_SCHEMA
    assert plain["seed"] == 7
    assert "created" not in plain
    stamped = manifest_data(record.name, record.params, config, "1.0",
                            created=True)
    assert "created" in stamped
    stamped.pop("created")
    assert stamped == plain


def test_certificate_round_trip_is_byte_stable(run):
    record, config, cert, _ = run
    manifest = manifest_data(record.name, record.params, config, "1.0")
    text = dumps(certificate_data(cert, manifest))
    decoded, decoded_manifest = certificate_from_data(
        read_json_text(text))
    assert decoded_manifest == manifest
    assert dumps(certificate_data(decoded, decoded_manifest)) == text
    assert np.array_equal(decoded.anchor, cert.anchor)
    assert np.array_equal(decoded.zeta, cert.zeta)
    assert decoded.lam == cert.lam
    assert len(decoded.combination) == len(cert.combination)


def test_certificate_lambda_undefined_round_trip(run):
    record, _, cert, _ = run
    cert_none = dataclasses.replace(cert, lam=None)
    data = certificate_data(cert_none)
    assert data["lambda"] == UNDEFINED
    decoded, _ = certificate_from_data(data)
    assert decoded.lam is None


def test_certificate_schema_is_checked(run):
    record, config, _, trace = run
    with pytest.raises(UsageError):
        certificate_from_data(trace_data(trace))
    with pytest.raises(UsageError):
        certificate_from_data({"schema": "bogus/9"})


def test_trace_round_trip_drops_wall_time(run):
    record, config, cert, trace = run
    data = trace_data(trace)
    assert data["schema"] == TRACE_SCHEMA
    assert "wall_time_s" not in dumps(data)
    decoded, _ = trace_from_data(read_json_text(dumps(data)))
    assert decoded.wall_time_s == 0.0
    assert decoded.outer_steps == trace.outer_steps
    assert decoded.records == to_jsonable(trace.records)
    assert dumps(trace_data(decoded)) == dumps(data)


def test_trace_schema_is_checked(run):
    _, _, cert, _ = run
    with pytest.raises(UsageError):
        trace_from_data(certificate_data(cert))


def test_config_round_trip(run):
    _, config, _, _ = run
    rebuilt = config_from_data(dataclasses.asdict(config))
    assert rebuilt == config


def test_config_rejects_unknown_keys():
    with pytest.raises(UsageError, match="unknown config keys"):
        config_from_data({"delta": 0.1, "target_eps": 0.05, "bogus": 1})


def test_config_rejects_missing_required_fields():
    with pytest.raises(UsageError, match="bad config"):
        config_from_data({})
