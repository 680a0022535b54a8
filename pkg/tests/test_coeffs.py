import json
import math
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from tp_shearlets import (
    EllipseRegion,
    FourierTable,
    InvalidIndexError,
    InvalidParameterError,
    LinearCombination,
    Orientation,
    ResourceError,
    RotatedEllipse,
    ShearletIndex,
    coeff_batch,
    coeff_direct,
    coeff_map,
    discrete_angle,
    edge_map,
    eval_symbol,
    make_exp_window,
    sample_symbol,
    translates,
)
from tp_shearlets.coeffs import default_selection, indicator_on_grid, render_overlay
from tp_shearlets.symbols import boundary_distance
from tp_shearlets.verify import check_map_shape

G = make_exp_window(0.025)
ELLIPSE = EllipseRegion(1.0, 3.0, math.pi / 6)
PROVIDER = RotatedEllipse(ELLIPSE)


def brute_force_coefficient(idx: ShearletIndex, y: np.ndarray) -> complex:
    radius = 1 << (idx.j + 1)
    axis = np.arange(-radius, radius + 1)
    k1, k2 = np.meshgrid(axis, axis, indexing="ij")
    k = np.column_stack([k1.ravel(), k2.ravel()]).astype(np.float64)
    psi = eval_symbol(G, idx, k)
    k, psi = k[psi > 0], psi[psi > 0]
    shift = np.array([2.0 ** (-idx.j - 1), 0.0]) if idx.horizontal else np.array([0.0, 2.0 ** (-idx.j - 1)])
    terms = PROVIDER.coefficient(k) * psi * np.exp(2j * np.pi * (k @ (y - shift)))
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def test_direct_against_brute_force():
    idx = ShearletIndex("h", 6, 0)
    y = np.zeros(2)
    value = coeff_direct(sample_symbol(G, idx), PROVIDER, y)
    assert isinstance(value, complex)
    assert abs(value - brute_force_coefficient(idx, y)) < 1e-10


@pytest.mark.parametrize("j,s", [(6, 5), (6, 6), (8, 6)])
def test_fft_fold_matches_direct_sums(j: int, s: int):
    half = 1 << (j // 2)
    points = translates(s)
    rng = np.random.default_rng(j + s)
    picked = rng.choice(points.shape[0], 32, replace=False)
    for orientation in Orientation:
        for shear in (0, 3, -half + 1):
            symbol = sample_symbol(G, ShearletIndex(orientation, j, shear))
            mapped = coeff_map(symbol, PROVIDER, s).values.ravel()
            scale = np.max(np.abs(mapped))
            assert scale > 0

            batch = coeff_batch(symbol, PROVIDER, points)
            assert np.max(np.abs(mapped - batch)) < 1e-10 * scale

            direct = coeff_direct(symbol, PROVIDER, points[picked])
            assert np.max(np.abs(mapped[picked] - direct)) < 1e-10 * scale


def test_translates():
    y = translates(3)
    assert y.shape == (64, 2)
    assert np.array_equal(y[0], [-0.5, -0.5])
    assert np.array_equal(y[9], [-0.375, -0.375])
    assert np.array_equal(y[-1], [0.375, 0.375])


def test_map_follows_region_shifts():
    s = 6
    n = 1 << s
    symbol = sample_symbol(G, ShearletIndex("v", 6, -2))
    base = coeff_map(symbol, PROVIDER, s).values
    moved = EllipseRegion(1.0, 3.0, math.pi / 6, center=(2.0 * math.pi * 2 / n, -2.0 * math.pi * 3 / n))
    shifted = coeff_map(symbol, RotatedEllipse(moved), s).values
    assert np.max(np.abs(shifted - np.roll(base, (2, -3), axis=(0, 1)))) < 1e-10 * np.max(np.abs(base))


def test_map_is_linear():
    s = 5
    symbol = sample_symbol(G, ShearletIndex("h", 6, 1))
    table = FourierTable({(30, 4): 0.5j, (-25, -2): 1.0, (1, 1): 3.0})
    combined = LinearCombination(((2.0, PROVIDER), (-1.0, table)))
    expected = 2.0 * coeff_map(symbol, PROVIDER, s).values - coeff_map(symbol, table, s).values
    assert np.max(np.abs(coeff_map(symbol, combined, s).values - expected)) < 1e-12 * np.max(np.abs(expected))


def test_zero_provider():
    symbol = sample_symbol(G, ShearletIndex("h", 4, 0))
    cmap = coeff_map(symbol, FourierTable({}), 4)
    assert np.array_equal(cmap.values, np.zeros((16, 16)))
    assert cmap.pgm_scale() == 0.0


def test_map_arguments():
    symbol = sample_symbol(G, ShearletIndex("h", 4, 0))
    with pytest.raises(InvalidParameterError):
        coeff_map(symbol, PROVIDER, 1)
    with pytest.raises(ResourceError):
        coeff_map(symbol, PROVIDER, 10, memory_budget=1 << 20)


def test_constant_and_low_frequency_tables_give_zero_maps():
    for orientation in Orientation:
        symbol = sample_symbol(G, ShearletIndex(orientation, 6, 2))
        assert np.array_equal(coeff_map(symbol, FourierTable({(0, 0): 1.0}), 5).values, np.zeros((32, 32)))

        # every frequency with |k|_inf <= 2^j / 3 lies below the band of g~
        rng = np.random.default_rng(3)
        low = {(k1, k2): complex(*rng.normal(size=2)) for k1 in range(-21, 22) for k2 in range(-21, 22)}
        assert np.array_equal(coeff_map(symbol, FourierTable(low), 5).values, np.zeros((32, 32)))


@pytest.mark.parametrize("orientation", list(Orientation))
def test_magnitude_symmetric_under_reflected_translate(orientation: Orientation):
    # provider and symbol are even, so coeff depends on y~ = y - shift only up to the sign of y~
    j = s = 6
    n = 1 << s
    mag = coeff_map(sample_symbol(G, ShearletIndex(orientation, j, -3)), PROVIDER, s).magnitude()
    # y -> 2 shift - y, the shift being one grid step along the orientation axis
    shifted = (n + 1 - np.arange(n)) % n
    plain = (n - np.arange(n)) % n
    rows, cols = (shifted, plain) if orientation is Orientation.HORIZONTAL else (plain, shifted)
    mirrored = mag[np.ix_(rows, cols)]
    assert np.allclose(mirrored, mag, rtol=0, atol=1e-12 * mag.max())


def test_map_shape_on_ellipse():
    report = check_map_shape(ELLIPSE, G, ShearletIndex("h", 8, -3), s=8)
    assert report.passed, report.failures
    assert report.fitted_constants["restricted_mass"] >= 0.99
    assert report.fitted_constants["edge_mass"] >= 0.95
    assert report.fitted_constants["drop_decades"] >= 4.0


def test_largest_coefficient_sits_on_an_aligned_arc():
    j, s = 8, 8
    idx = ShearletIndex("h", j, -3)
    mag = coeff_map(sample_symbol(G, idx), PROVIDER, s).magnitude().ravel()
    peak = int(np.argmax(mag))
    centre = 2.0 * np.pi * translates(s)[peak]
    distance, normal = boundary_distance(ELLIPSE, centre)
    assert distance < 2.0 * np.pi * 2.0 ** (-j / 2)
    cone = 2.0 * (math.atan(-1 / 16) - math.atan(-5 / 16))
    assert abs(math.sin(normal - discrete_angle(idx))) < math.sin(cone)


def test_edge_map():
    j, s = 6, 6
    selection = default_selection(j)
    assert len(selection) == 2 * (2 * 8 - 1)

    emap = edge_map(G, j, s, PROVIDER, selection=selection)
    expected = np.zeros((1 << s, 1 << s))
    for shear in range(-7, 8):
        for orientation in Orientation:
            symbol = sample_symbol(G, ShearletIndex(orientation, j, shear))
            expected += np.abs(coeff_map(symbol, PROVIDER, s).values)
    assert np.array_equal(emap.magnitudes, expected)

    reordered = edge_map(G, j, s, PROVIDER, selection=list(reversed(selection)))
    assert np.array_equal(reordered.magnitudes, emap.magnitudes)
    assert emap.metadata()["selection"][0] == "h:-7"

    distance, _ = boundary_distance(2.0 * np.pi * translates(s))
    near = distance <= 4.0 * 2.0 * np.pi * 2.0 ** (-j / 2)
    values = emap.magnitudes.ravel()
    assert values[near].sum() >= 0.95 * values.sum()


def test_edge_map_selection():
    with pytest.raises(InvalidIndexError):
        edge_map(G, 6, 5, PROVIDER, selection=[])
    with pytest.raises(InvalidIndexError):
        edge_map(G, 6, 5, PROVIDER, selection=[(Orientation.HORIZONTAL, 12)])


def test_exports(tmp_path: Path):
    s = 5
    cmap = coeff_map(sample_symbol(G, ShearletIndex("h", 6, -3)), PROVIDER, s)
    pgm = tmp_path / "coeff.pgm"
    cmap.save_pgm(pgm)
    cmap.save_csv(tmp_path / "coeff.csv")
    cmap.save_sorted_csv(tmp_path / "coeff_sorted.csv")

    data = pgm.read_bytes()
    header = b"P5\n32 32\n65535\n"
    assert data.startswith(header)
    assert len(data) == len(header) + 32 * 32 * 2
    pixels = np.frombuffer(data[len(header) :], dtype=">u2")
    assert pixels.max() == 65535
    with Image.open(pgm) as img:
        assert img.size == (32, 32)
        read = np.array(img).astype(np.int64)
    assert np.array_equal(read, np.rint(cmap.image() * cmap.pgm_scale()).astype(np.int64))

    sidecar = json.loads(pgm.with_suffix(".json").read_text())
    assert sidecar["index"] == "h:6:-3"
    assert sidecar["s"] == s
    assert sidecar["max"] == pytest.approx(float(cmap.magnitude().max()))

    rows = np.loadtxt(tmp_path / "coeff.csv", delimiter=",", skiprows=1)
    assert rows.shape == (32 * 32, 4)
    m1, m2 = rows[17, :2].astype(int)
    assert complex(rows[17, 2], rows[17, 3]) == cmap.values[m1, m2]
    assert (tmp_path / "coeff.csv").read_text().startswith("m1,m2,re,im\n")

    ranked = np.loadtxt(tmp_path / "coeff_sorted.csv", delimiter=",", skiprows=1)
    assert ranked[0, 0] == 1
    assert np.all(np.diff(ranked[:, 1]) <= 0)


def test_render_overlay(tmp_path: Path):
    s = 5
    cmap = coeff_map(sample_symbol(G, ShearletIndex("h", 6, 0)), PROVIDER, s)
    background = indicator_on_grid(ELLIPSE, s)
    image = render_overlay(cmap, background)
    assert image.mode == "RGB" and image.size == (32, 32)

    file = tmp_path / "render.ppm"
    image.save(file, format="PPM")
    data = file.read_bytes()
    header = b"P6\n32 32\n255\n"
    assert data.startswith(header)
    assert len(data) == len(header) + 32 * 32 * 3

    # the largest coefficient is pure red whatever lies beneath it
    pixels = np.array(image)
    row, col = np.unravel_index(np.argmax(cmap.image()), (32, 32))
    assert tuple(pixels[row, col]) == (255, 0, 0)


def test_indicator_on_grid():
    inside = indicator_on_grid(ELLIPSE, 8)
    assert inside.shape == (256, 256)
    assert inside.mean() == pytest.approx(ELLIPSE.area / (4.0 * math.pi**2), abs=5e-3)
