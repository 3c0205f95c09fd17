import csv
import io
import json
import os

import pytest
from hypothesis import given, settings, strategies as st

from dtn_parking.cli import METRIC_KEYS, REPORT_COLUMNS, MissingMetrics, collect_rows, main, render_report
from dtn_parking.config import (
    ParseError, UnknownKey, ValidationError, build_scenario, bundled_config, dump_config, parse_config,
)

SMALL = {"name": "small", "nodes": {"vehicles": 8}, "engine": {"duration_ms": 60000, "seeds": [1, 2]},
         "workload": {"request_interval_ms": 20000}}


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_minimal_document_gets_every_default():
    cfg = parse_config("{}")
    assert cfg.nodes.vehicles == 50 and cfg.nodes.radio_range == 100
    assert cfg.router.kind == "aco" and cfg.router.aco.rho == 0.1
    assert cfg.router.ga.population_size == 50 and cfg.engine.seeds == [1]
    assert cfg.workload.hold_duration_ms == 600_000
    echoed = json.loads(dump_config(cfg))
    assert echoed["router"]["aco"]["evap_interval_ms"] == 30_000
    assert echoed["servers"][0]["inventory"]["car"] == {"capacity": 5, "fare": 20.0}


def test_server_outside_its_area_is_named():
    doc = {"servers": [{"name": "north", "area": 0, "position": [500, 500]}]}
    with pytest.raises(ValidationError) as exc:
        parse_config(json.dumps(doc))
    assert "north" in exc.value.field


def test_misspelled_key_is_unknown():
    with pytest.raises(UnknownKey) as exc:
        parse_config('{"router": {"aco": {"allpha": 1.0}}}')
    assert exc.value.path == "router.aco.allpha"


@pytest.mark.parametrize("text", ["{", "[1, 2]", "not json"])
def test_malformed_documents(text):
    with pytest.raises(ParseError):
        parse_config(text)


@pytest.mark.parametrize("doc,field", [
    ({"engine": {"seeds": []}}, "engine.seeds"),
    ({"router": {"aco": {"rho": 0}}}, "router.aco.rho"),
    ({"servers": [{"area": 7, "position": [200, 200]}]}, "servers[0]"),
    ({"areas": [{"group": 0, "rect": [0, 0, 10, 10]}, {"group": 0, "rect": [5, 5, 20, 20]}],
      "servers": [{"area": 0, "position": [1, 1]}]}, "areas[1]"),
])
def test_invalid_values_name_their_field(doc, field):
    with pytest.raises(ValidationError) as exc:
        parse_config(json.dumps(doc))
    assert exc.value.field.startswith(field)


@settings(max_examples=40, deadline=None)
@given(st.fixed_dictionaries({}, optional={
    "name": st.text(min_size=1, max_size=8),
    "nodes": st.fixed_dictionaries({}, optional={"vehicles": st.integers(0, 100),
                                                 "radio_range": st.floats(1, 500)}),
    "router": st.fixed_dictionaries({}, optional={"kind": st.sampled_from(["aco", "epidemic", "ga"]),
                                                  "aco": st.fixed_dictionaries({}, optional={"rho": st.floats(0.01, 1)})}),
    "engine": st.fixed_dictionaries({}, optional={"seeds": st.lists(st.integers(0, 2**64 - 1), min_size=1, max_size=3)}),
}))
def test_config_round_trip(doc):
    cfg = parse_config(json.dumps(doc))
    assert parse_config(dump_config(cfg)) == cfg


def test_bundled_configs_parse():
    assert bundled_config().nodes.vehicles == 50
    assert bundled_config("conservation").nodes.vehicles == 30


def test_build_scenario_is_seed_deterministic():
    cfg = parse_config(json.dumps(SMALL))
    a, _ = build_scenario(cfg, 5)
    b, _ = build_scenario(cfg, 5)
    c, _ = build_scenario(cfg, 6)
    assert a.contacts == b.contacts and a.requests == b.requests
    assert a.requests != c.requests
    assert [s.node for s in a.servers] == [8, 9]


def test_trace_overrides_resolve_relative_to_config(tmp_path):
    (tmp_path / "contacts.txt").write_text("# static\n0,0,2,U\n")
    (tmp_path / "members.txt").write_text("0,0,0,J\n")
    doc = dict(SMALL, nodes={"vehicles": 2}, trace={"contact_trace": "contacts.txt", "membership_script": "members.txt"})
    out = tmp_path / "out"
    assert main(["run", "--config", write_cfg(tmp_path, doc), "--out", str(out), "--seed-override", "3"]) == 0
    trace = (out / "trace-3.csv").read_text()
    assert "0,contact_up,0,2,," in trace
    assert sorted(os.listdir(out)) == ["config.json", "metrics-3.json", "trace-3.csv"]
    assert json.loads((out / "config.json").read_text())["engine"]["seeds"] == [3]


def test_bad_trace_file_is_a_config_error(tmp_path, capsys):
    (tmp_path / "contacts.txt").write_text("0,2,0,U\n")
    doc = dict(SMALL, trace={"contact_trace": "contacts.txt"})
    assert main(["run", "--config", write_cfg(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "contacts.txt" in err and "line 1" in err


def test_run_writes_one_document_and_trace_per_seed(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a)]) == 0
    assert sorted(os.listdir(a)) == ["config.json", "metrics-1.json", "metrics-2.json", "trace-1.csv", "trace-2.csv"]
    assert main(["run", "--config", cfg, "--out", str(b)]) == 0
    for f in os.listdir(a):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    doc = json.loads((a / "metrics-1.json").read_text())
    assert list(doc)[:3] == ["scenario", "router", "seed"]
    assert [k for k in doc if k in METRIC_KEYS] == [k for k in METRIC_KEYS if k in doc]
    assert (a / "trace-1.csv").read_text().startswith("time_ms,event_type,node,peer,message_id,detail\n")


def test_unwritable_output_is_a_runtime_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--config", write_cfg(tmp_path, SMALL), "--out", str(blocker / "sub")]) == 3
    assert capsys.readouterr().err


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", "--config", write_cfg(tmp_path, {"nodes": {"vehicles": 3}})]) == 0
    assert json.loads(capsys.readouterr().out)["nodes"]["vehicles"] == 3
    assert main(["validate", "--config", write_cfg(tmp_path, {"allpha": 1})]) == 2
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 2


def fake_run(tmp_path, name, router, seeds, scenario="s"):
    d = tmp_path / name
    d.mkdir()
    for seed in seeds:
        doc = {"scenario": scenario, "router": router, "seed": seed}
        doc.update({k: float(seed) for k in METRIC_KEYS if "latency" not in k or seed > 1})
        (d / f"metrics-{seed}.json").write_text(json.dumps(doc))
    return str(d)


def parse_report(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_report_rows_plus_summary(tmp_path):
    rows = parse_report(render_report(collect_rows([fake_run(tmp_path, "a", "aco", [1, 2, 3])])))
    assert [r["seed"] for r in rows] == ["1", "2", "3", "mean"]
    assert float(rows[-1]["transmissions"]) == 2.0
    assert float(rows[-1]["request_latency_mean"]) == 2.5  # absent in seed 1, averaged over the rest
    assert rows[0]["request_latency_mean"] == ""


def test_report_median_and_mixed_routers(tmp_path, capsys):
    dirs = [fake_run(tmp_path, "a", "aco", [1, 2, 10]), fake_run(tmp_path, "e", "epidemic", [4])]
    assert main(["report", *dirs, "--stat", "median"]) == 0
    rows = parse_report(capsys.readouterr().out)
    summary = [r for r in rows if r["seed"] == "median"]
    assert [(r["router"], float(r["transmissions"])) for r in summary] == [("aco", 2.0), ("epidemic", 4.0)]
    assert len(rows) == 6 and all(list(r) == REPORT_COLUMNS for r in rows)


def test_empty_report_is_header_only(capsys):
    assert main(["report"]) == 0
    assert capsys.readouterr().out == ",".join(REPORT_COLUMNS) + "\n"


def test_missing_metrics_named(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    with pytest.raises(MissingMetrics):
        collect_rows([str(tmp_path / "empty")])
    assert main(["report", str(tmp_path / "empty")]) == 3
    assert "empty" in capsys.readouterr().err
