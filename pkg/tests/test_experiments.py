"""End-to-end runs, their CSV artifacts, config parsing and the renderer."""

import csv
import re
import statistics

import numpy as np
import pytest

from blockaca.baca import BacaTrace
from blockaca.clustering import BlockPartition, build_cluster_tree, build_partition
from blockaca.experiments import (RESULT_COLUMNS, RunConfig, build_mesh,
                                  compare, read_results, render_partition_svg, run)
from blockaca.mesh import generate_icosphere, load_off, save_off

TIMING_COLUMNS = ("wall_seconds", "wall_assembly_seconds", "wall_solve_seconds")


@pytest.fixture(scope="module")
def out_root(tmp_path_factory):
    return tmp_path_factory.mktemp("runs")


@pytest.fixture(scope="module")
def dense_run(out_root):
    config = RunConfig(level=2, pipeline="dense", cg_tol=1e-10,
                       out_dir=str(out_root / "dense320"))
    return config, run(config)


@pytest.fixture(scope="module")
def aca_run(out_root):
    config = RunConfig(level=2, pipeline="aca", eps_aca=1e-8, cg_tol=1e-10,
                       out_dir=str(out_root / "aca320"))
    return config, run(config)


@pytest.fixture(scope="module")
def baca_run(out_root):
    # alpha couples the inner solves tightly enough that the final
    # residual sits below the discretization error of this mesh.
    config = RunConfig(level=2, pipeline="baca", eps_baca=1e-8, alpha=0.5,
                       out_dir=str(out_root / "baca320"))
    return config, run(config)


def test_dense_row_reference_quantities(dense_run):
    _, row = dense_run
    assert row["N"] == 320
    assert row["compression_pct"] == 100.0
    assert row["storage_mb"] == pytest.approx(8.0 * 320 ** 2 / 2 ** 20)
    assert row["entries_computed"] == 320 ** 2
    assert row["outer_iterations"] == 0
    assert row["cg_iterations"] > 0
    assert row["residual"] <= 1e-10
    assert row["avg_rank_base"] is None
    assert 0.0 < row["e_h"] < 0.05


def test_aca_row_matches_dense_solution_error(dense_run, aca_run):
    _, dense_row = dense_run
    _, aca_row = aca_run
    assert aca_row["N"] == dense_row["N"]
    assert abs(aca_row["e_h"] - dense_row["e_h"]) <= 1e-4
    assert aca_row["avg_rank_base"] > 0.0
    assert aca_row["residual"] <= 1e-10


def test_small_blocks_complete_densely(dense_run, aca_run):
    # At this size every admissible block is narrow enough that the tight
    # tolerance drives its rank past the densification cutoff, so the
    # stored bytes are exactly the dense ones (the crosses spent on the
    # way show up as extra computed entries).
    _, dense_row = dense_run
    _, aca_row = aca_run
    assert aca_row["storage_mb"] == dense_row["storage_mb"]
    assert aca_row["compression_pct"] == 100.0
    assert aca_row["entries_computed"] > 320 ** 2


def test_baca_row_matches_dense_solution_error(dense_run, baca_run):
    _, dense_row = dense_run
    _, baca_row = baca_run
    assert abs(baca_row["e_h"] - dense_row["e_h"]) <= 1e-3
    assert baca_row["storage_mb"] < dense_row["storage_mb"]
    assert baca_row["outer_iterations"] >= 1
    assert baca_row["residual"] > 0.0


def test_results_csv_round_trip(aca_run):
    config, row = aca_run
    parsed = read_results(f"{config.out_dir}/results.csv")
    assert tuple(parsed) == RESULT_COLUMNS
    for name in RESULT_COLUMNS:
        if row[name] is None:
            assert parsed[name] is None
        else:
            assert parsed[name] == row[name]
    assert isinstance(parsed["N"], int)
    assert isinstance(parsed["entries_computed"], int)
    assert isinstance(parsed["cg_iterations"], int)


def test_trace_artifact_schema(dense_run, baca_run):
    config_d, _ = dense_run
    config_b, row_b = baca_run
    with open(f"{config_d.out_dir}/trace.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 1
    assert tuple(rows[0]) == BacaTrace.COLUMNS
    assert rows[0]["eta"] == ""
    assert rows[0]["k"] == "0"
    with open(f"{config_b.out_dir}/trace.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == row_b["outer_iterations"]
    assert all(float(r["eta"]) >= 0.0 for r in rows)


def test_mesh_artifact_reloads_identically(dense_run):
    config, _ = dense_run
    assert load_off(f"{config.out_dir}/mesh.off") == generate_icosphere(2)


def test_rerun_reproduces_all_non_timing_numbers(baca_run, out_root):
    config, _ = baca_run
    first = read_results(f"{config.out_dir}/results.csv")
    again = RunConfig(**{**config.__dict__, "out_dir": str(out_root / "baca320b")})
    run(again)
    second = read_results(f"{again.out_dir}/results.csv")
    for name in RESULT_COLUMNS:
        if name not in TIMING_COLUMNS:
            assert second[name] == first[name], name


def test_worker_count_does_not_change_numbers(baca_run, out_root):
    config, _ = baca_run
    parallel = RunConfig(**{**config.__dict__, "workers": 4,
                            "out_dir": str(out_root / "baca320w4")})
    run(parallel)
    first = read_results(f"{config.out_dir}/results.csv")
    second = read_results(f"{parallel.out_dir}/results.csv")
    for name in RESULT_COLUMNS:
        if name not in TIMING_COLUMNS:
            assert second[name] == first[name], name


def test_compare_with_itself_is_unity(aca_run):
    config, _ = aca_run
    path = f"{config.out_dir}/results.csv"
    ratios = compare(path, path)
    assert ratios["N"] == 320
    for name in ("time_ratio", "storage_ratio", "entries_ratio",
                 "cg_iterations_ratio"):
        assert ratios[name] == 1.0


def test_compare_rejects_mismatched_sizes(dense_run, out_root):
    config_d, _ = dense_run
    tiny = RunConfig(level=0, pipeline="dense", out_dir=str(out_root / "n20"))
    run(tiny)
    with pytest.raises(ValueError):
        compare(f"{tiny.out_dir}/results.csv",
                f"{config_d.out_dir}/results.csv")


def test_config_text_round_trip():
    config = RunConfig(geometry="ellipsoid", level=1, semiaxes="1,1,3",
                       refine_band=0.5, refine_rounds=2, p="1.5,0,0",
                       pipeline="aca", eps_aca=3e-7, workers=2)
    assert RunConfig.from_text(config.to_text()) == config


def test_config_parses_comments_and_blanks():
    text = "# a benchmark\n\nlevel = 1  # small\npipeline=dense\n"
    config = RunConfig.from_text(text)
    assert config.level == 1
    assert config.pipeline == "dense"


@pytest.mark.parametrize("text", [
    "level", "bogus=1", "level=1\nlevel=2", "level=abc", "beta=2.0",
    "pipeline=magic", "geometry=off", "p=1,2", "semiaxes=a,b,c",
])
def test_config_rejects_malformed_text(text):
    with pytest.raises(ValueError):
        RunConfig.from_text(text)


def test_build_mesh_off_geometry(tmp_path):
    mesh = generate_icosphere(1)
    save_off(mesh, tmp_path / "m.off")
    config = RunConfig(geometry="off", off_path=str(tmp_path / "m.off"))
    assert build_mesh(config) == mesh


RECT_RE = re.compile(r'<rect x="(\d+)" y="(\d+)" width="(\d+)" height="(\d+)" '
                     r'fill="(#[0-9a-f]{6})"')
LABEL_RE = re.compile(r">(\d+)</text>")
GREEN, RED = "#2e8b57", "#c0392b"


def parse_svg(path):
    text = open(path).read()
    rects = [(int(x), int(y), int(w), int(h), color)
             for x, y, w, h, color in RECT_RE.findall(text)]
    labels = [int(v) for v in LABEL_RE.findall(text)]
    return rects, labels


def test_render_bare_partition_all_red(tmp_path):
    mesh = generate_icosphere(1)
    part = build_partition(build_cluster_tree(mesh, 15), 0.8)
    path = render_partition_svg(part, tmp_path / "blocks.svg")
    rects, labels = parse_svg(path)
    assert labels == []
    assert len(rects) == len(part.blocks)
    assert all(color == RED for *_, color in rects)
    cover = np.zeros((part.n, part.n), dtype=np.int64)
    for x, y, w, h, _ in rects:
        cover[y:y + h, x:x + w] += 1
    assert (cover == 1).all()


def test_render_small_run_tiles_exactly(baca_run):
    config, row = baca_run
    rects, labels = parse_svg(f"{config.out_dir}/blocks.svg")
    assert sum(w * h for _, _, w, h, _ in rects) == row["N"] ** 2
    greens = sum(color == GREEN for *_, color in rects)
    assert greens == len(labels)


def test_render_pipeline_labels_reflect_ranks(ellipsoid_runs):
    labels_by_pipeline = {}
    for config, row in ellipsoid_runs:
        rects, labels = parse_svg(f"{config.out_dir}/blocks.svg")
        assert sum(w * h for _, _, w, h, _ in rects) == row["N"] ** 2
        greens = sum(color == GREEN for *_, color in rects)
        assert greens == len(labels)
        assert greens > 0
        assert all(v >= 1 for v in labels)
        labels_by_pipeline[config.pipeline] = labels
    # The adaptive loop stops each block at the rank the estimator needs;
    # the fixed-tolerance sweep pushes every block further.
    assert (statistics.fmean(labels_by_pipeline["baca"])
            < statistics.fmean(labels_by_pipeline["aca"]))
    assert (statistics.median(labels_by_pipeline["baca"])
            <= statistics.median(labels_by_pipeline["aca"]))


def test_render_requires_cluster_tree(part320):
    bare = BlockPartition(part320.blocks, 0.8, part320.n)
    with pytest.raises(ValueError):
        render_partition_svg(bare, "unused.svg")


@pytest.fixture(scope="module")
def ellipsoid_runs(out_root):
    base = dict(geometry="ellipsoid", level=3, semiaxes="1,1,3",
                refine_band=1.0, refine_rounds=1, workers=4)
    config_a = RunConfig(pipeline="aca", eps_aca=1e-6,
                         out_dir=str(out_root / "ell_aca"), **base)
    config_b = RunConfig(pipeline="baca", eps_baca=1e-6,
                         out_dir=str(out_root / "ell_baca"), **base)
    return (config_a, run(config_a)), (config_b, run(config_b))


def test_ellipsoid_band_refinement_size(ellipsoid_runs):
    (_, row_a), (_, row_b) = ellipsoid_runs
    assert row_a["N"] == row_b["N"] == 2720


def test_ellipsoid_adaptive_solve_needs_fewer_cg_iterations(ellipsoid_runs):
    # Same target accuracy on the stretched geometry: the adaptive loop
    # spends fewer matrix applications than solving against the
    # fixed-tolerance approximation, and computes fewer entries.
    (config_a, row_a), (config_b, row_b) = ellipsoid_runs
    assert row_b["cg_iterations"] < row_a["cg_iterations"]
    ratios = compare(f"{config_b.out_dir}/results.csv",
                     f"{config_a.out_dir}/results.csv")
    assert ratios["entries_ratio"] < 0.8
    assert ratios["storage_ratio"] < 0.9
    assert row_a["e_h"] < 0.1 and row_b["e_h"] < 0.1
