import json

import pandas as pd
import pytest

from neumannlab.config import settings
from neumannlab.errors import ReportIoError, ValidationError
from neumannlab.fem.mesh import mesh_unit_disc
from neumannlab.functionals.quadrature import build_rule
from neumannlab.harness.experiment_config import ExperimentConfig, parse_map_token
from neumannlab.harness.report import TABLE_COLUMNS, emit_report, load_report, report_table
from neumannlab.maps import conformal_maps as cm
from neumannlab.stability import experiment
from neumannlab.stability.bounds import LemmaReport, LemmaRow


def _config(*pairs, **overrides):
    params = dict(refinement=8, k=3, quadrature_level=8, sobolev_ascent_iters=5)
    params.update(overrides)
    maps = [(parse_map_token(a), parse_map_token(b)) for a, b in pairs]
    return ExperimentConfig(map_pairs=maps, **params)


SMALL = (("identity", "scale:0.9"), ("identity", "poly_perturb:0.2,2"))


@pytest.fixture(scope="module")
def small_report():
    return experiment.run_experiment(_config(*SMALL))


def test_pairs_are_reported_in_config_order(small_report):
    assert [p.pair for p in small_report.pairs] == ["identity|scale:0.9", "identity|poly_perturb:0.2,2"]
    assert all(p.status in ("pass", "warn") for p in small_report.pairs)
    assert not small_report.failed
    assert not small_report.errored


def test_pair_report_contents(small_report):
    pair = small_report.pairs[0]

    assert len(pair.univalence) == 2
    assert pair.functionals["alpha"] == 4.0
    assert len(pair.spectrum_1["eigenvalues"]) == 3
    assert [b["n"] for b in pair.bounds] == [1, 2, 3]
    assert pair.lemma["passed"] is True
    assert pair.constants["q"] == pytest.approx(8.0)
    assert pair.constants["Cq"] == max(pair.constants["C_1"], pair.constants["C_2"])
    assert pair.constants["estimated"] is True
    assert pair.constants["convention"] == experiment.CONSTANT_CONVENTION
    assert set(pair.lemma32) == {"B_holder", "B_discrete", "consistent"}
    assert pair.quasidisc is None


def test_provenance_records_mesh_and_solver(small_report):
    prov = small_report.provenance

    assert prov["refinement"] == 8
    assert prov["mesh_vertices"] == 217
    assert prov["mesh_triangles"] == 384
    assert prov["quadrature_level"] == 8
    assert prov["alpha_used"] == 4.0
    assert prov["solver"] == "dense"


def test_timings_stay_out_of_the_report(small_report):
    assert set(small_report.timings) == {"0:identity|scale:0.9", "1:identity|poly_perturb:0.2,2"}
    assert {"univalence", "functionals", "eigensolve", "constants", "lemma"} <= set(
        small_report.timings["0:identity|scale:0.9"]
    )
    assert "timings" not in small_report.to_dict()


def test_failing_univalence_is_recorded_as_an_error():
    squared = cm.from_coefficients([[0, 0], [0, 0], [1, 0]], label="z^2")
    config = _config(("identity", "scale:0.9"))
    config.map_pairs.append((cm.identity(), squared))

    report = experiment.run_experiment(config)

    assert report.pairs[1].status == "error"
    assert report.pairs[1].errors[0]["type"] == "UnivalenceSuspect"
    assert report.pairs[0].status in ("pass", "warn")
    assert report.errored


def test_lemma_failure_marks_the_pair_failed(monkeypatch):
    def failing(*args, **kwargs):
        return LemmaReport(B=0.0, B_per_mean=[0.0, 0.0], rows=[LemmaRow(2, 1.0, 2.0, 1.0, 0.0, 0.0, 0.0, False)])

    monkeypatch.setattr(experiment, "verify_lemma_two_weights", failing)

    report = experiment.run_experiment(_config(("identity", "scale:0.9")))

    assert report.pairs[0].status == "fail"
    assert report.failed


def test_resolve_alpha():
    assert experiment.resolve_alpha(ExperimentConfig(alpha=5.0)) == (5.0, None)

    alpha, meta = experiment.resolve_alpha(ExperimentConfig(alpha=5.0, K=1.0))
    assert alpha == 5.0
    assert "q" not in meta
    assert meta["smirnov_dim_bound"] == 1.0

    alpha, meta = experiment.resolve_alpha(ExperimentConfig(K=1.5))
    assert alpha == pytest.approx(2.8)
    assert meta["q"] == pytest.approx(14.0)
    assert meta["sup_p"] == pytest.approx(3.6)


def test_run_pair_with_a_quasidisc_constant():
    report, timings, plot = experiment.run_pair(
        cm.identity(), cm.poly_perturb(0.2, 2), mesh_unit_disc(8), build_rule(8), 2.8, 2, 3, K=1.5,
    )

    assert report.status in ("pass", "warn")
    assert report.quasidisc["q"] == pytest.approx(14.0)
    assert report.quasidisc["M"] == pytest.approx(report.quasidisc["C"] ** 2)
    assert report.constants["q"] == pytest.approx(14.0)
    assert plot is None
    assert "constants" in timings


def test_threaded_run_matches_serial(monkeypatch, small_report):
    monkeypatch.setattr(settings, "workers", 2)

    threaded = experiment.run_experiment(_config(*SMALL))

    assert threaded == small_report


def test_report_round_trip(tmp_path, small_report):
    emit_report(small_report, tmp_path)

    loaded = load_report(tmp_path / "report.json")

    assert loaded == small_report
    assert loaded.schema_version == 1


def test_report_json_is_reproducible(tmp_path, small_report):
    rerun = experiment.run_experiment(_config(*SMALL))
    emit_report(small_report, tmp_path / "a")
    emit_report(rerun, tmp_path / "b")

    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "table.csv").read_bytes() == (tmp_path / "b" / "table.csv").read_bytes()


def test_table_has_one_row_per_pair_and_index(tmp_path, small_report):
    emit_report(small_report, tmp_path)

    table = pd.read_csv(tmp_path / "table.csv")

    assert list(table.columns) == TABLE_COLUMNS
    assert len(table) == 6
    assert table["n"].tolist() == [1, 2, 3, 1, 2, 3]
    assert table["lemma_pass"].all()
    assert report_table(small_report)["gap"].iloc[0] == 0.0


def test_empty_experiment_writes_a_header_only_table(tmp_path):
    report = experiment.run_experiment(_config())
    emit_report(report, tmp_path)

    assert (tmp_path / "table.csv").read_text(encoding="utf-8") == ",".join(TABLE_COLUMNS) + "\n"
    assert json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))["pairs"] == []


def test_plot_data_files(tmp_path):
    report = experiment.run_experiment(_config(("identity", "scale:0.9"), emit_plot_data=True))

    paths = emit_report(report, tmp_path)

    names = sorted(p.name for p in paths)
    assert names == [
        "boundary_00_identity_scale_0.9.txt",
        "mesh_00_identity_scale_0.9_1.txt",
        "mesh_00_identity_scale_0.9_2.txt",
        "report.json",
        "table.csv",
        "timings.json",
    ]
    mesh_lines = (tmp_path / "mesh_00_identity_scale_0.9_1.txt").read_text(encoding="utf-8").splitlines()
    assert mesh_lines[0] == "# x y psi_1..psi_3"
    assert len(mesh_lines) == 1 + 217 + 1 + 384
    assert len(mesh_lines[1].split()) == 5
    boundary = (tmp_path / "boundary_00_identity_scale_0.9.txt").read_text(encoding="utf-8").splitlines()
    assert len(boundary) == 513


def test_no_plot_files_unless_requested(tmp_path, small_report):
    names = sorted(p.name for p in emit_report(small_report, tmp_path))

    assert names == ["report.json", "table.csv", "timings.json"]


def test_unwritable_output_is_a_report_io_error(tmp_path, small_report):
    blocker = tmp_path / "blocked"
    blocker.write_text("not a directory", encoding="utf-8")

    with pytest.raises(ReportIoError):
        emit_report(small_report, blocker / "out")


def test_missing_report_is_a_report_io_error(tmp_path):
    with pytest.raises(ReportIoError):
        load_report(tmp_path / "absent.json")


def test_identical_maps_give_zero_gaps_and_bounds():
    report = experiment.run_experiment(_config(("identity", "identity"), k=4))
    pair = report.pairs[0]

    assert pair.status == "pass"
    for b in pair.bounds:
        for key in ("observed_gap", "lemma31_bound", "lemma31_loose", "theorem33_bound", "theorem_bound",
                    "measure_bound"):
            assert b[key] == 0.0, (b["n"], key)
    assert pair.lemma["B"] == 0.0
    assert all(r["gap"] == 0.0 and r["bound"] == 0.0 for r in pair.lemma["rows"])


@pytest.fixture(scope="module")
def scaling_report():
    pairs = [("identity", f"scale:{c}") for c in (0.5, 0.8, 0.9, 0.95)]
    return experiment.run_experiment(_config(*pairs, refinement=16, k=6, quadrature_level=16, sobolev_ascent_iters=50))


@pytest.mark.parametrize("index,c", [(0, 0.5), (1, 0.8), (2, 0.9), (3, 0.95)])
def test_theorem_bound_covers_the_scaling_gap(scaling_report, index, c):
    pair = scaling_report.pairs[index]
    disc = pair.spectrum_1["eigenvalues"]

    for b in pair.bounds:
        n = b["n"]
        assert b["observed_gap"] == pytest.approx(disc[n - 1] * (1 / c ** 2 - 1), rel=1e-9, abs=1e-9)
        assert b["theorem_bound"] >= b["observed_gap"]
        assert b["theorem_pass"]


def test_k_beyond_the_mesh_is_rejected_before_solving():
    with pytest.raises(ValidationError) as exc:
        experiment.run_experiment(_config(("identity", "scale:0.9"), k=216))

    assert exc.value.field == "k"
