import io
import json
import math

import jsonschema
import numpy as np
import pytest

from ucaris import harness
from ucaris.harness import ScenarioError, SimRecord


def minimal(**over):
    raw = {"wavelength": 0.003, "beta": 4 * math.pi, "n_elements": 4,
           "segments": [{"distance": 4.2, "side": "transmit"},
                        {"distance": 4.5, "side": "receive"}]}
    raw.update(over)
    return raw


class TestScenarios:
    def test_shipped_scenarios_load(self):
        names = harness.list_scenarios()
        assert {"reference", "split_20m", "direct_20m", "misaligned"} <= set(names)
        for name in names:
            sc = harness.load_scenario(name)
            assert sc.segments and len(sc.hash) == 16
            assert all(s.source.num_elements == sc.n_elements for s in sc.segments)

    def test_reference_values(self, reference):
        assert reference.n_elements == 8 and reference.wavelength == 0.003
        assert [s.center_distance for s in reference.segments] == [4.2, 4.5, 4.2]
        assert [s.side.value for s in reference.segments] == ["transmit", "receive", "receive"]

    def test_degrees_are_converted(self):
        sc = harness.load_scenario("misaligned")
        assert sc.segments[0].rot_x == pytest.approx(math.radians(sc.raw["segments"][0]["rot_x"]))
        split = harness.load_scenario("split_20m")
        assert split.grid_max == pytest.approx(math.pi / 9)

    def test_load_from_path_and_stream(self, tmp_path):
        raw = minimal()
        path = tmp_path / "s.json"
        path.write_text(json.dumps(raw))
        a = harness.load_scenario(path)
        b = harness.load_scenario(io.StringIO(json.dumps(raw)))
        assert a.hash == b.hash == harness.scenario_from_dict(raw).hash
        assert a.name == "s"

    def test_hash_tracks_content(self):
        assert harness.scenario_from_dict(minimal()).hash != \
            harness.scenario_from_dict(minimal(seed=1)).hash

    @pytest.mark.parametrize("raw", [
        minimal(n_elements=0),
        minimal(segments=[]),
        minimal(wavelength=-1),
        minimal(units="gradians"),
        {k: v for k, v in minimal().items() if k != "beta"},
        minimal(segments=[{"distance": 4.2, "side": "sideways"}]),
        minimal(segments=[{"distance": 4.2, "side": "transmit", "rot_x": 2.0}]),
        minimal(error_surface={"mirror": [1]}),
        minimal(angle_range={"segment": 5}),
        minimal(units="degrees", error_surface={"grid_max": 90}),
    ])
    def test_invalid_scenarios(self, raw):
        with pytest.raises(ScenarioError):
            harness.scenario_from_dict(raw)

    def test_bad_files(self, tmp_path):
        with pytest.raises(ScenarioError):
            harness.load_scenario("no_such_scenario")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ScenarioError):
            harness.load_scenario(bad)
        with pytest.raises(ScenarioError):
            harness.load_scenario(tmp_path / "missing.json")

    def test_with_n(self, reference):
        sc = reference.with_n(4)
        assert sc.n_elements == 4
        assert all(s.sink.num_elements == 4 for s in sc.segments)
        assert sc.direct_link.source.num_elements == 4
        assert sc.chain()[0].shape == (4, 4)

    def test_schema_files_are_valid(self):
        for name in ("scenario", "records"):
            jsonschema.Draft202012Validator.check_schema(harness.load_schema(name))


class TestSweeps:
    def test_error_surface_grid(self, reference):
        recs = harness.run_error_surface(reference, harness.rotation_grid(reference, 3))
        assert len(recs) == 9 and [r.index for r in recs] == list(range(9))
        assert recs[0].value < 1e-12
        assert recs[-1].value > recs[0].value
        assert recs[-1].sweep["rot_x"] == pytest.approx(math.pi / 3)

    @pytest.mark.parametrize("mode", harness.ERROR_SURFACE_MODES)
    def test_error_surface_modes(self, reference, mode):
        recs = harness.run_error_surface(reference, [(0.0, 0.0), (0.1, 0.1)], mode)
        assert recs[0].value < 1e-12 and recs[1].value > 0
        assert recs[0].metric == ("epsilon_total" if mode == "total" else "epsilon")

    def test_error_surface_validation(self, reference):
        with pytest.raises(ValueError):
            harness.run_error_surface(reference, [(2.0, 0.0)])
        with pytest.raises(ValueError):
            harness.run_error_surface(reference, mode="bogus")
        with pytest.raises(ScenarioError):
            harness.run_error_surface(harness.scenario_from_dict(minimal()), mode="direct")

    def test_split_vs_direct(self):
        sc = harness.load_scenario("split_20m")
        r = harness.compare_split_vs_direct(sc, math.pi / 3)
        assert r.metadata["per_segment_angle"] == pytest.approx(math.pi / 9)
        assert r.value == pytest.approx(r.metadata["epsilon_direct"]
                                        / r.metadata["epsilon_total_split"])

    def test_ber_sweep_records(self, reference):
        recs = harness.run_ber_sweep(reference, [0.0, 10.0], n=4, trials=500)
        assert [r.metric for r in recs] == ["ber", "ber_analytic"] * 2
        sim = [r for r in recs if r.metric == "ber"]
        assert sim[0].value >= sim[1].value
        assert all(r.metadata["ber_variant"] == "sqrt_per_n" for r in recs)
        assert sim[0].metadata["bits"] == 500 * 4

    def test_ber_sweep_guards(self, reference):
        with pytest.raises(ValueError):
            harness.run_ber_sweep(reference, [0.0], detector="zf")
        with pytest.raises(harness.SearchSpaceError):
            harness.run_ber_sweep(reference, [0.0], detector="traditional_ml", n=32, trials=10)

    def test_capacity_sweep(self, reference):
        recs = harness.run_capacity_sweep(reference, [4, 8], [0.0, 10.0])
        assert [(r.sweep["n"], r.sweep["snr_db"]) for r in recs] == \
            [(4, 0.0), (4, 10.0), (8, 0.0), (8, 10.0)]
        assert recs[1].value > recs[0].value
        assert recs[0].metadata["log_base"] == 2

    def test_angle_range(self, reference):
        r = harness.run_angle_range(reference, 1e-3)
        assert 0 < r.value < math.pi / 3
        assert r.metadata["achieved_error"] <= 1e-3

    def test_complexity_table(self, reference):
        recs = harness.run_complexity_table([20], [4], reference)
        ratios = {(r.sweep["scheme"], r.metric): r.value for r in recs
                  if r.metric.endswith("ratio")}
        assert ratios[("fully_digital_vs_proposed_precoder", "additions_ratio")] == \
            pytest.approx(115, rel=0.02)
        assert all(r.scenario_hash == reference.hash for r in recs)

    def test_circulant_check(self, reference):
        recs = harness.run_circulant_check(reference, [4], poses=3)
        assert len(recs) == 3
        assert all(r.value < 1e-10 for r in recs)
        assert all(r.metadata["tilde_deviation"] > r.value for r in recs)


class TestDeterminism:
    def test_worker_invariance(self, reference):
        args = (reference, [0.0, 5.0, 10.0])
        kw = dict(n=4, trials=3000)
        one = harness.dumps(harness.run_ber_sweep(*args, workers=1, **kw), "json")
        four = harness.dumps(harness.run_ber_sweep(*args, workers=4, **kw), "json")
        assert one == four

    def test_error_surface_worker_invariance(self, reference):
        grid = harness.rotation_grid(reference, 4)
        assert harness.run_error_surface(reference, grid, workers=1) == \
            harness.run_error_surface(reference, grid, workers=3)

    def test_same_seed_same_bytes(self, reference):
        a = harness.dumps(harness.run_ber_sweep(reference, [3.0], n=4, trials=800), "csv")
        b = harness.dumps(harness.run_ber_sweep(reference, [3.0], n=4, trials=800), "csv")
        assert a == b

    def test_seed_changes_draws(self, reference):
        from dataclasses import replace
        a = harness.run_ber_sweep(reference, [0.0], n=4, trials=2000)[0]
        b = harness.run_ber_sweep(replace(reference, seed=1), [0.0], n=4, trials=2000)[0]
        assert a.metadata["bit_errors"] != b.metadata["bit_errors"]

    def test_detectors_share_draws(self, reference):
        kw = dict(n=4, trials=2000)
        a = harness.run_ber_sweep(reference, [2.0], "proposed", **kw)[0]
        b = harness.run_ber_sweep(reference, [2.0], "traditional_ml", **kw)[0]
        assert a.seed == b.seed and a.metadata["bits"] == b.metadata["bits"]


class TestOutput:
    @pytest.fixture
    def records(self, reference):
        return (harness.run_complexity_table([4], [2], reference)[:3]
                + harness.run_ber_sweep(reference, [0.0], n=4, trials=200)
                + [SimRecord("x", 0, {"label": "a,b \"q\""}, "m", float("inf"),
                             metadata={"nested": [1, 2]})])

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_round_trip(self, records, fmt, tmp_path):
        path = tmp_path / f"out.{fmt}"
        harness.emit(records, fmt, path)
        back = harness.load_records(path)
        assert harness.dumps(back, fmt) == path.read_text()
        assert back[0].sweep == records[0].sweep
        assert back[-1].sweep["label"] == 'a,b "q"'

    def test_json_validates(self, records):
        harness.validate_records(json.loads(harness.dumps(records, "json")))

    def test_schema_rejects_bad_record(self):
        with pytest.raises(jsonschema.ValidationError):
            harness.validate_records([{"experiment": "x"}])

    def test_csv_header(self, records):
        header = harness.dumps(records, "csv").splitlines()[0].split(",")
        assert header[:2] == ["experiment", "index"]
        assert header[-6:] == ["metric", "value", "uncertainty", "seed", "scenario_hash",
                               "metadata"]

    def test_every_record_is_self_describing(self, records):
        for r in records[:-1]:
            assert r.seed is not None and r.scenario_hash

    def test_stdout(self, records, capsys):
        harness.emit(records[:1], "json", "-")
        assert json.loads(capsys.readouterr().out)[0]["experiment"] == "complexity"

    def test_unknown_format(self, records):
        with pytest.raises(ValueError):
            harness.dumps(records, "xml")

    def test_numpy_scalars_serialise(self):
        r = SimRecord("x", 0, {"n": np.int64(4)}, "m", np.float64(0.5))
        assert json.loads(harness.dumps([r], "json"))[0]["sweep"]["n"] == 4
