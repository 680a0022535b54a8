import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import special

from tp_shearlets import (
    EllipseRegion,
    FourierTable,
    InvalidParameterError,
    Orientation,
    ShearletIndex,
    UsageError,
    make_exp_window,
)
from tp_shearlets.verify import (
    SUITES,
    QuadratureResult,
    QuadratureSpec,
    SuiteOptions,
    VerificationReport,
    check_ab_lemma,
    check_fresnel_lemma,
    check_lower_bound,
    check_p_lemma,
    check_spatial_decay,
    check_upper_bound,
    far_point,
    fresnel_fc,
    fresnel_fs,
    integral_a,
    integral_b,
    p1,
    p2,
    p_plus,
    run_suite,
)
from tp_shearlets.symbols import boundary_distance
from tp_shearlets.verify.bounds import (
    DEFAULT_ELLIPSE,
    aligned_index,
    far_field_profile,
    lower_bound_samples,
    measure_doubling,
    misaligned_index,
    resolved_configurations,
)
from tp_shearlets.verify import suites
from tp_shearlets.verify.lemmas import ABTable, truncation_point

G = make_exp_window(0.025)


def scipy_fresnel(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s, c = special.fresnel(np.sqrt(2.0 * x / np.pi))
    scale = 2.0 * math.sqrt(math.pi / 2.0)
    return scale * c, scale * s


def test_quadrature_spec():
    spec = QuadratureSpec(abs_tol=1e-12)
    result = spec.integrate(lambda x: np.array([x * x, math.cos(x)]), 0.0, 1.0)
    assert result.converged
    assert result.value[0] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert result.value[1] == pytest.approx(math.sin(1.0), abs=1e-12)
    assert spec.refined().abs_tol == pytest.approx(1e-13)

    # int_1^inf cos(v)/v dv = -Ci(1)
    tail = QuadratureSpec(abs_tol=1e-10).cosine_tail(lambda v: 1.0 / v, 1.0)
    assert tail.value == pytest.approx(-special.sici(1.0)[1], abs=1e-9)


def test_fresnel_against_scipy():
    x = np.concatenate([np.linspace(0.01, 20.0, 400), [63.9, 64.0, 64.1, 100.0, 1000.0]])
    fc, fs = scipy_fresnel(x)
    assert np.max(np.abs(fresnel_fc(x) - fc)) < 1e-9
    assert np.max(np.abs(fresnel_fs(x) - fs)) < 1e-9


def test_fresnel_limits():
    assert fresnel_fc(0.0) == 0.0
    assert fresnel_fs(0.0) == 0.0
    limit = math.sqrt(math.pi / 2.0)
    assert fresnel_fc(1e6) == pytest.approx(limit, abs=2e-3)
    assert fresnel_fs(1e6) == pytest.approx(limit, abs=2e-3)
    with pytest.raises(InvalidParameterError):
        fresnel_fc(-1.0)


def test_fresnel_lemma():
    report = check_fresnel_lemma()
    assert report.passed, report.failures[:5]
    assert 3.36 < report.fitted_constants["F+(3pi/4)"] < 3.37
    assert report.fitted_constants["F+(7pi/4)"] > 1.91
    assert report.fitted_constants["F-(3pi/4)"] > 0.14
    assert any(p["input"].get("refinement") for p in report.points)


@pytest.mark.parametrize("grid", [np.arange(1, 201) * 0.1, np.array([0.0, 0.005]), np.array([19.995, 20.005])])
def test_fresnel_lemma_grid(grid: np.ndarray):
    with pytest.raises(InvalidParameterError):
        check_fresnel_lemma(grid)


def fixed_rule_a(lam: float, p: float, A: float, panels: int = 200_000) -> float:
    """Composite Simpson on t = sqrt(v) over [0, sqrt(r)]."""
    end = math.sqrt(truncation_point(lam, p, A))
    t = np.linspace(0.0, end, 2 * panels + 1)
    h = 2.0 * math.sqrt(A * lam) * t
    f = 2.0 * (G(h + p * lam) + G(h - p * lam)) * np.cos(t * t)
    weights = np.ones_like(t)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(np.sum(weights * f) * (t[1] - t[0]) / 3.0)


def test_integral_a_against_fixed_rule():
    assert integral_a(1.0, 0.0, 1.0) == pytest.approx(fixed_rule_a(1.0, 0.0, 1.0), abs=1e-7)
    assert integral_a(0.5, 0.2, 3.0) == pytest.approx(fixed_rule_a(0.5, 0.2, 3.0), abs=1e-7)


def test_ab_symmetry_and_vectorization():
    lam = np.array([0.4, 0.9, 1.3])
    assert np.allclose(integral_a(lam, 0.15, 2.0), integral_a(lam, -0.15, 2.0), atol=1e-8)
    assert np.allclose(integral_b(lam, 0.15, 2.0), integral_b(lam, -0.15, 2.0), atol=1e-8)
    scalar = integral_b(0.9, 0.15, 2.0)
    assert scalar == pytest.approx(integral_b(lam, 0.15, 2.0)[1], abs=1e-8)


@pytest.mark.parametrize("lam,p,A", [(1.0, 0.0, 0.0), (1.0, 0.0, -1.0), (0.2, 0.0, 1.0), (1.0, 0.3, 1.0)])
def test_ab_invalid(lam: float, p: float, A: float):
    with pytest.raises(InvalidParameterError):
        integral_a(lam, p, A)


def test_ab_lemma():
    report = check_ab_lemma(count=20, seed=3)
    assert report.passed
    assert report.fitted_constants["min(a, b)"] > 0
    again = check_ab_lemma(count=20, seed=3)
    assert again.to_json() == report.to_json()


def test_ab_table_interpolation():
    table = ABTable(0.125, 1.0)
    assert table.validate(16) < 1e-6


def test_p_integrals():
    table = ABTable(0.0, 1.0)
    assert p1(0.0, 0.0, 1.0, table=table) > 0
    D = np.array([-1.0, 0.5])
    assert np.allclose(p_plus(D, 0.0, 1.0, table=table), p1(D, 0.0, 1.0, table=table) + p2(D, 0.0, 1.0, table=table))
    with pytest.raises(InvalidParameterError):
        p1(3.0, 0.0, 1.0, table=table)


def test_p_lemma():
    D = np.arange(-12, 13) * (math.pi / 16.0)
    report = check_p_lemma(D, [-0.25, 0.0, 0.125], [0.1, 10.0])
    assert report.passed, report.failures[:5]
    assert report.fitted_constants["C"] > 0


def test_p_lemma_default_grid():
    report = check_p_lemma()
    assert report.passed, report.failures[:5]
    interpolation = [p for p in report.points if p["input"].get("interpolation")]
    # a and b are even in p, so 5 tables per A
    assert len(interpolation) == 15
    assert all(p["value"] < 1e-6 for p in interpolation)


def test_ab_table_grows_for_small_A():
    table, error = ABTable.fitted(0.0, 0.1)
    assert error < 1e-6
    assert table.size > ABTable(0.0, 1.0).size


def test_unconverged_quadrature_fails_the_report():
    report = check_ab_lemma(count=4, spec=QuadratureSpec(abs_tol=1e-14, max_subdivisions=1))
    assert not report.passed
    assert any(p["input"].get("quadrature") for p in report.failures)

    stuck = VerificationReport("demo")
    assert not stuck.add_quadrature({"integral": "x"}, QuadratureResult(value=1.0, error=1e-3, converged=False))
    assert stuck.failures[0]["input"] == {"integral": "x", "quadrature": True}


def test_refined_quadrature_is_self_consistent():
    spec = QuadratureSpec(abs_tol=1e-10)
    def integrand(x: float) -> np.ndarray:
        return np.array([math.exp(-x * x), math.cos(3.0 * x) / (1.0 + x)])

    base = spec.integrate(integrand, 0.0, 4.0)
    refined = spec.refined().integrate(integrand, 0.0, 4.0)
    assert base.converged and refined.converged
    report = VerificationReport("demo")
    assert report.add_refinement({"integral": "f"}, base, refined)

    moved = QuadratureResult(value=base.value + 1e-6, error=base.error, converged=True)
    assert not report.add_refinement({"integral": "f"}, base, moved)


def test_ab_lemma_carries_refinement_points():
    report = check_ab_lemma(count=8, seed=1)
    refinements = [p for p in report.points if p["input"].get("refinement")]
    assert refinements and all(p["pass"] for p in refinements)
    assert any(p["input"].get("quadrature") for p in report.points)


def test_report(tmp_path: Path):
    report = VerificationReport("demo", params={"n": np.int64(3)})
    report.add_point({"x": 1.0}, np.float64(2.0), 3.0, True, 1.0)
    report.add_point({"x": 2.0}, [1 + 2j], "> 5", False, -4.0)
    report.fit("C", 0.5)
    report.note("two points")
    assert not report.passed
    assert report.min_margin == -4.0
    assert len(report.failures) == 1

    other = VerificationReport("part")
    other.add_point(0, 1.0, 2.0, True)
    other.fit("k", math.inf)
    report.merge(other)
    assert report.points[-1]["input"] == {"part": "part", "at": 0}

    file = tmp_path / "demo.json"
    report.save(file)
    data = json.loads(file.read_text())
    assert set(data) == {"check", "params", "points", "fitted_constants", "min_margin", "passed", "notes"}
    assert data["params"]["n"] == 3
    assert data["points"][1]["value"] == [[1.0, 2.0]]
    assert data["fitted_constants"]["part.k"] == "inf"
    assert data["passed"] is False
    assert "FAIL" in report.summary()


def test_run_suite_unknown():
    with pytest.raises(UsageError):
        run_suite("nope")
    assert set(SUITES) == {"windows", "support", "fresnel", "ab", "p12", "decay", "upper", "lower", "shape", "fftfold"}


def test_suite_options_reach_the_checks(monkeypatch: pytest.MonkeyPatch):
    seen = {}

    def record(name: str):
        def check(**kwargs) -> VerificationReport:
            seen[name] = kwargs["spec"].abs_tol
            return VerificationReport(name)

        return check

    monkeypatch.setattr(suites, "check_fresnel_lemma", record("fresnel"))
    monkeypatch.setattr(suites, "check_ab_lemma", record("ab"))
    monkeypatch.setattr(suites, "check_p_lemma", record("p12"))
    for name in ("fresnel", "ab", "p12"):
        run_suite(name, SuiteOptions(tol=1e-7))
    assert seen == {"fresnel": 1e-7, "ab": 1e-7, "p12": 1e-7}

    # without --tol every suite keeps its own tolerance
    for name in ("fresnel", "ab", "p12"):
        run_suite(name, SuiteOptions())
    assert seen == {"fresnel": 1e-10, "ab": 1e-8, "p12": 1e-9}


def test_decay_suite_follows_j():
    report = run_suite("decay", SuiteOptions(j=6, s=6, j_list=(4, 6, 8)))
    assert report.params["index"] == "h:6:0"
    assert report.params["scales"] == [4]
    assert report.params["s"] == 6
    assert set(report.fitted_constants) >= {"C[j=4]", "C[j=6]"}


@pytest.mark.parametrize(
    "name,options",
    [
        ("windows", SuiteOptions()),
        ("support", SuiteOptions(j=6)),
        ("fftfold", SuiteOptions(j=6, s=6)),
        ("fftfold", SuiteOptions(j=6, s=5, ellipse=EllipseRegion(1.5, 0.5, 2.0))),
    ],
)
def test_suites_pass(name: str, options: SuiteOptions):
    report = run_suite(name, options)
    assert report.passed, report.failures[:5]
    assert report.params["suite"] == name


def test_spatial_decay():
    report = check_spatial_decay(G)
    assert report.passed, report.failures
    assert report.fitted_constants["C[j=6]"] > 0
    assert report.fitted_constants["C[j=8]"] > 0
    kinds = [point["input"] for point in report.points]
    assert sum(1 for k in kinds if k.get("at") == "directional band") == 2
    assert any("scales" in k for k in kinds)
    assert sum(1 for k in kinds if k.get("doubling")) == 3


def test_measured_doubling_follows_the_envelope():
    doubling = measure_doubling(G, ShearletIndex("h", 8, 0))
    assert 0 < doubling.outer < doubling.inner
    assert doubling.envelope_ratio == pytest.approx(0.25, rel=0.3)
    assert doubling.ratio <= 4.0 * doubling.envelope_ratio


@pytest.mark.parametrize(
    "j,angle,expected",
    [
        (8, 0.0, ShearletIndex("h", 8, 0)),
        (8, math.pi, ShearletIndex("h", 8, 0)),
        (8, math.pi / 2, ShearletIndex("v", 8, 0)),
        (8, -math.pi / 2, ShearletIndex("v", 8, 0)),
        (8, math.atan(-3 / 16), ShearletIndex("h", 8, -3)),
        (6, math.pi / 2 - math.atan(5 / 8), ShearletIndex("v", 6, 5)),
    ],
)
def test_aligned_index(j: int, angle: float, expected: ShearletIndex):
    assert aligned_index(j, angle) == expected


def test_misaligned_index():
    assert misaligned_index(ShearletIndex("h", 8, -3)) == ShearletIndex("h", 8, 5)
    assert misaligned_index(ShearletIndex("v", 8, 4)) == ShearletIndex("v", 8, -4)


def test_far_point():
    e = EllipseRegion(1.0, 3.0, math.pi / 6)
    x, distance = far_point(e)
    assert distance > 1.0
    assert not e.contains(x)


def test_lower_bound_symmetry_on_disc():
    samples = lower_bound_samples(EllipseRegion(1.0, 1.0), G, 6, slopes=(0.0,))
    by_orientation = {s.index.orientation: s for s in samples}
    h = by_orientation[Orientation.HORIZONTAL]
    v = by_orientation[Orientation.VERTICAL]
    assert h.value > 0 and v.value > 0
    assert abs(h.value - v.value) <= 0.1 * max(h.value, v.value)
    assert h.misaligned < h.value
    # centres sit inside the disc along the orientation axis
    assert np.allclose(h.position, [1.0 - math.pi / 2.0 * 2.0**-6, 0.0], atol=1e-6)
    assert np.allclose(v.position, [0.0, 1.0 - math.pi / 2.0 * 2.0**-6], atol=1e-6)
    assert abs(h.mismatch) < 1e-9 and abs(v.mismatch) < 1e-9


def test_resolved_configurations():
    configs = resolved_configurations(DEFAULT_ELLIPSE, 6)
    assert configs
    # h:6:-6 sits next to the tip of the ellipse, where the curvature radius is about 0.42
    assert -0.75 not in configs.get(Orientation.HORIZONTAL, [])
    assert 0.0 in configs[Orientation.HORIZONTAL]
    assert resolved_configurations(EllipseRegion(0.2, 0.2), 6) == {}


def test_lower_bound_on_ellipse():
    report = check_lower_bound()
    assert report.passed, report.failures[:5]
    assert report.fitted_constants["stability"] <= 4.0
    kinds = [point["input"] for point in report.points]
    assert any("far_field" in k for k in kinds)
    assert any(k.get("misaligned") for k in kinds)
    assert any(k.get("p") for k in kinds)


def test_lower_bound_without_resolved_points():
    report = check_lower_bound(EllipseRegion(0.2, 0.2), j_list=(6,))
    assert not report.passed
    assert report.failures[0]["input"] == {"resolved_configurations": True}


def test_far_field_uses_the_aligned_shearlet():
    x, distance = far_point(DEFAULT_ELLIPSE)
    _, normal = boundary_distance(DEFAULT_ELLIPSE, x)
    profile = far_field_profile(DEFAULT_ELLIPSE, G, (6, 8), x=x)
    assert [f.index for f in profile] == [aligned_index(6, float(normal)), aligned_index(8, float(normal))]
    assert all(f.level >= f.floor for f in profile)


def test_upper_bound_for_zero_function():
    report = check_upper_bound(j_list=(6, 8), samples=4, provider=FourierTable({}))
    assert report.passed, report.failures[:5]
    assert report.fitted_constants["C[j=6]"] == 0.0
    assert report.fitted_constants["C[j=8]"] == 0.0
