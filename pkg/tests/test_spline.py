import json

import numpy as np
import pytest

from monosmooth.errors import SplineFormatError
from monosmooth.interval import CubicSegment
from monosmooth.spline import (
    SplineCurve,
    c1_defect,
    deserialize,
    dumps,
    eval_curve,
    sample_curve,
    write_samples_csv,
)


def linear_curve(v=1.0, t0=0.0, t1=1.0):
    return SplineCurve((t0, t1), (CubicSegment(t0, t1, 0.0, v, 0.0, 0.0),))


def s_curve():
    # x(t) = 3 t^2 - 2 t^3 on [0, 1].
    return SplineCurve((0.0, 1.0), (CubicSegment(0.0, 1.0, 0.0, 0.0, 3.0, -2.0),))


class TestEval:
    def test_linear(self):
        c = linear_curve(2.0)
        assert eval_curve(c, 0.5) == pytest.approx(1.0)
        assert eval_curve(c, 0.5, 1) == pytest.approx(2.0)
        assert eval_curve(c, 0.5, 2) == 0.0

    def test_s_curve_midpoint(self):
        c = s_curve()
        assert eval_curve(c, 0.5) == pytest.approx(0.5)
        assert eval_curve(c, 0.5, 1) == pytest.approx(1.5)
        assert eval_curve(c, 0.5, 2) == pytest.approx(0.0, abs=1e-14)

    def test_clamp_returns_endpoint_value(self):
        c = s_curve()
        assert eval_curve(c, 2.0, clamp=True) == pytest.approx(1.0)
        assert eval_curve(c, -1.0, clamp=True) == pytest.approx(0.0)

    def test_out_of_domain_rejected_without_clamp(self):
        with pytest.raises(ValueError, match="outside"):
            eval_curve(s_curve(), 1.5)

    def test_breakpoint_uses_right_segment(self):
        # C1 but not C2 at the junction: second derivative picks the right side.
        curve = SplineCurve(
            (0.0, 1.0, 2.0),
            (
                CubicSegment(0.0, 1.0, 0.0, 1.0, 0.0, 0.0),
                CubicSegment(1.0, 2.0, 1.0, 1.0, 5.0, 0.0),
            ),
        )
        assert eval_curve(curve, 1.0, 2) == pytest.approx(10.0)

    def test_derivatives_match_finite_differences(self, rng):
        c = s_curve()
        h = 1e-6
        for t in rng.uniform(0.05, 0.95, size=50):
            fd1 = (eval_curve(c, t + h) - eval_curve(c, t - h)) / (2 * h)
            fd2 = (eval_curve(c, t + h, 1) - eval_curve(c, t - h, 1)) / (2 * h)
            assert abs(fd1 - eval_curve(c, t, 1)) <= 1e-6 * (1 + abs(fd1))
            assert abs(fd2 - eval_curve(c, t, 2)) <= 1e-6 * (1 + abs(fd2))


class TestSerialization:
    def test_round_trip_bitwise(self, rng):
        coeffs = rng.standard_normal(8)
        curve = SplineCurve(
            (0.0, 0.3333333333333333, 1.7),
            (
                CubicSegment(0.0, 0.3333333333333333, *coeffs[:4]),
                CubicSegment(
                    0.3333333333333333, 1.7,
                    coeffs[0] + 0.3333333333333333 * (coeffs[1] + 0.3333333333333333 * (coeffs[2] + 0.3333333333333333 * coeffs[3])),
                    *coeffs[5:8],
                ),
            ),
        )
        back = deserialize(json.loads(dumps(curve)))
        for a, b in zip(curve.segments, back.segments):
            assert (a.c0, a.c1, a.c2, a.c3) == (b.c0, b.c1, b.c2, b.c3)
        assert curve.breakpoints == back.breakpoints

    def test_empty_segment_list_rejected(self):
        with pytest.raises(SplineFormatError, match="empty"):
            deserialize({"breakpoints": [0.0, 1.0], "segments": []})

    def test_decreasing_breakpoints_rejected(self):
        doc = {
            "breakpoints": [0.0, 2.0, 1.0],
            "segments": [
                {"c0": 0, "c1": 0, "c2": 0, "c3": 0},
                {"c0": 0, "c1": 0, "c2": 0, "c3": 0},
            ],
        }
        with pytest.raises(SplineFormatError):
            deserialize(doc)

    def test_malformed_documents_rejected(self):
        with pytest.raises(SplineFormatError):
            deserialize("not json {")
        with pytest.raises(SplineFormatError):
            deserialize({"segments": [{"c0": 0, "c1": 0, "c2": 0, "c3": 0}]})
        with pytest.raises(SplineFormatError):
            deserialize({"breakpoints": [0.0, 1.0], "segments": [{"c0": 0}]})
        with pytest.raises(SplineFormatError):
            deserialize([1, 2, 3])

    def test_misaligned_counts_rejected(self):
        with pytest.raises(SplineFormatError, match="align"):
            deserialize({"breakpoints": [0.0, 1.0, 2.0],
                         "segments": [{"c0": 0, "c1": 0, "c2": 0, "c3": 0}]})

    def test_value_discontinuity_rejected(self):
        with pytest.raises(SplineFormatError, match="discontinuity"):
            SplineCurve(
                (0.0, 1.0, 2.0),
                (
                    CubicSegment(0.0, 1.0, 0.0, 0.0, 0.0, 0.0),
                    CubicSegment(1.0, 2.0, 5.0, 0.0, 0.0, 0.0),
                ),
            )


def test_sample_and_csv_export(tmp_path):
    c = s_curve()
    vals = sample_curve(c, np.array([0.0, 0.5, 1.0]))
    assert vals[1] == pytest.approx([0.5, 1.5, 0.0])
    out = tmp_path / "samples.csv"
    write_samples_csv(c, out, n=11)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,x,dx,ddx"
    assert len(lines) == 12
    mid = lines[6].split(",")
    assert float(mid[0]) == pytest.approx(0.5)
    assert float(mid[1]) == pytest.approx(0.5)


def test_c1_defect_reports_mismatch():
    curve = SplineCurve(
        (0.0, 1.0, 2.0),
        (
            CubicSegment(0.0, 1.0, 0.0, 1.0, 0.0, 0.0),
            CubicSegment(1.0, 2.0, 1.0, 3.0, 0.0, 0.0),
        ),
    )
    dval, dder = c1_defect(curve)
    assert dval == pytest.approx(0.0, abs=1e-15)
    assert dder == pytest.approx(2.0)
