import json
import math
from pathlib import Path

import numpy as np
import pytest

from tp_shearlets import (
    EllipseRegion,
    FourierTable,
    LinearCombination,
    Orientation,
    Paths,
    RotatedEllipse,
    ShearletIndex,
    SparseSymbol,
    UsageError,
    make_exp_window,
    sample_symbol,
)
from tp_shearlets.cli import EXIT_RESOURCE, EXIT_USAGE, run
from tp_shearlets.main import BatchMapper, Command, RunConfig, SymbolCache, process_batch


def fails_on_three(x: int) -> int:
    if x == 3:
        raise ValueError("three")
    return x * x


def test_coeff_map_command(tmp_path: Path):
    args = ["coeff-map", "--ellipse", "1,3,0.5236", "--j", "6", "--l", "-3", "--orient", "h", "--s", "6"]
    code = run([*args, "--out", str(tmp_path)])
    assert code == 0
    for name in ("coeff_h_6_-3.pgm", "coeff_h_6_-3.json", "coeff_h_6_-3.csv", "coeff_h_6_-3_sorted.csv"):
        assert (tmp_path / name).is_file(), name
    sidecar = json.loads((tmp_path / "coeff_h_6_-3.json").read_text())
    assert sidecar["index"] == "h:6:-3"
    assert sidecar["provider"].startswith("ellipse(a=1,b=3")


def test_gamma_in_degrees(tmp_path: Path):
    radians = tmp_path / "radians"
    degrees = tmp_path / "degrees"
    common = ["--j", "4", "--l", "1", "--s", "5"]
    assert run(["coeff-map", "--ellipse", f"1,2,{math.pi / 6!r}", "--out", str(radians), *common]) == 0
    assert run(["coeff-map", "--ellipse", "1,2,30", "--gamma-deg", "--out", str(degrees), *common]) == 0
    a = np.loadtxt(radians / "coeff_h_4_1.csv", delimiter=",", skiprows=1)
    b = np.loadtxt(degrees / "coeff_h_4_1.csv", delimiter=",", skiprows=1)
    assert np.allclose(a, b, rtol=0, atol=1e-13)


@pytest.mark.parametrize("suite,args", [("fftfold", ["--j", "6", "--s", "6"]), ("support", ["--j", "6"])])
def test_verify_command(tmp_path: Path, suite: str, args: list[str]):
    assert run(["verify", suite, *args, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / f"verify_{suite}.json").read_text())
    assert report["passed"] is True
    assert report["check"] == suite


def test_edge_map_command_with_workers(tmp_path: Path):
    cache = tmp_path / "cache"
    args = ["edge-map", "--j", "4", "--s", "5", "--ellipse", "1,3,0.5236", "--cache", str(cache)]
    assert run([*args, "--out", str(tmp_path / "serial")]) == 0
    assert len(list(cache.glob("*.sym"))) == 2 * (2 * 4 - 1)
    assert run([*args, "--out", str(tmp_path / "parallel"), "--threads", "2"]) == 0

    serial = np.loadtxt(tmp_path / "serial" / "edge_4.csv", delimiter=",", skiprows=1)
    parallel = np.loadtxt(tmp_path / "parallel" / "edge_4.csv", delimiter=",", skiprows=1)
    assert np.array_equal(serial, parallel)


def test_render_and_decay_commands(tmp_path: Path):
    assert run(["render", "--j", "4", "--l", "0", "--orient", "v", "--s", "5", "--out", str(tmp_path)]) == 0
    data = (tmp_path / "render_v_4_0.ppm").read_bytes()
    assert data.startswith(b"P6\n32 32\n255\n")

    assert run(["decay", "--j-list", "4,6", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "decay.csv").read_text().splitlines()
    assert lines[0] == "j,orientation,shear,value,log2,noise_floor"
    assert [line.split(",")[0] for line in lines[1:]] == ["4", "6"]


@pytest.mark.parametrize(
    "args",
    [
        ["coeff-map", "--j", "6"],
        ["coeff-map", "--j", "6", "--l", "1", "--orient", "both"],
        ["coeff-map", "--j", "7", "--l", "1"],
        ["coeff-map", "--j", "6", "--l", "9"],
        ["edge-map", "--l", "1", "--l-range", "0:2"],
        ["edge-map", "--b", "-1"],
        ["edge-map", "--ellipse", "1,4,0"],
        ["edge-map", "--threads", "0"],
        ["verify", "fftfold", "--j-list", "6,7"],
    ],
)
def test_usage_errors(tmp_path: Path, args: list[str]):
    assert run([*args, "--out", str(tmp_path)]) == EXIT_USAGE


def test_missing_table(tmp_path: Path):
    assert run(["edge-map", "--table", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == EXIT_USAGE


def test_unknown_suite(tmp_path: Path):
    with pytest.raises(SystemExit) as info:
        run(["verify", "everything", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_memory_budget(tmp_path: Path):
    assert run(["coeff-map", "--l", "0", "--s", "12", "--memory", "1", "--out", str(tmp_path)]) == EXIT_RESOURCE


def test_run_config_provider(tmp_path: Path):
    paths = Paths(tmp_path)
    table_file = tmp_path / "table.csv"
    FourierTable({(1, 0): 1.0}).to_csv(table_file)
    e = EllipseRegion(1.0, 2.0)

    assert isinstance(RunConfig(Command.EDGE_MAP, paths).provider(), RotatedEllipse)
    assert RunConfig(Command.EDGE_MAP, paths, ellipse=e).provider() == RotatedEllipse(e)
    assert isinstance(RunConfig(Command.EDGE_MAP, paths, table=table_file).provider(), FourierTable)
    both = RunConfig(Command.EDGE_MAP, paths, ellipse=e, table=table_file).provider()
    assert isinstance(both, LinearCombination)
    assert len(both.terms) == 2

    config = RunConfig("edge-map", paths, j=4, orientations=("v",))
    assert config.command is Command.EDGE_MAP
    assert config.indices() == [ShearletIndex("v", 4, l) for l in range(-3, 4)]
    with pytest.raises(UsageError):
        RunConfig(Command.VERIFY, paths, suite="nope")


def test_symbol_cache(tmp_path: Path, caplog):
    g = make_exp_window(0.025)
    cache = SymbolCache(g, tmp_path, 1 << 30)
    idx = ShearletIndex("h", 4, -2)
    first = cache(idx)
    file = cache.file(idx)
    assert file.is_file()
    assert cache.key(idx) != SymbolCache(make_exp_window(0.1), tmp_path, 1 << 30).key(idx)

    again = cache(idx)
    assert np.array_equal(again.k, first.k)
    assert np.array_equal(again.values, sample_symbol(g, idx).values)

    file.write_bytes(b"garbage")
    with caplog.at_level("WARNING"):
        recovered = cache(idx)
    assert "Discarding" in caplog.text
    assert np.array_equal(recovered.values, first.values)
    assert SparseSymbol.from_file(file).index == idx


def test_symbol_cache_without_directory():
    g = make_exp_window(0.025)
    cache = SymbolCache(g, None, 1 << 30)
    idx = ShearletIndex(Orientation.VERTICAL, 4, 1)
    assert cache.file(idx) is None
    assert cache(idx).count == sample_symbol(g, idx).count


@pytest.mark.parametrize("threads", [None, 1, 3])
def test_batch_mapper_keeps_order(threads: int | None):
    assert BatchMapper(threads)(abs, [-5, 2, -7, 0, 1]) == [5, 2, 7, 0, 1]


@pytest.mark.parametrize("threads", [None, 2])
def test_batch_mapper_failures(threads: int | None):
    with pytest.raises(ValueError) as info:
        BatchMapper(threads)(fails_on_three, [1, 2, 3, 4])
    assert any("while processing 3" in note for note in info.value.__notes__)


def test_process_batch():
    done, errors = process_batch(fails_on_three, [(0, 2), (1, 3), (2, 4)])
    assert done == [(0, 4), (2, 16)]
    assert len(errors) == 1
    assert str(errors[0][0]) == "three"
