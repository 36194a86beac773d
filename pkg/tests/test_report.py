# tests/test_report.py

import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dirichlet_wrapper.errors import ConfigError
from dirichlet_wrapper.rejection import RejectionCurvePoint, sweep_curve
from dirichlet_wrapper.report import (
    CurveBundle,
    ascii_panel,
    load_curves_csv,
    render_curves_svg,
    summary_table,
    write_curves_csv,
)

SVG_NS = "{http://www.w3.org/2000/svg}"
GRID = [i / 10 for i in range(6)]


def _oracle_scored(n=100, error_rate=0.2, seed=0):
    rng = np.random.default_rng(seed)
    correct = np.ones(n, dtype=bool)
    correct[rng.choice(n, size=int(n * error_rate), replace=False)] = False
    return [(1.0 - float(c), bool(c)) for c in correct]


def _random_scored(n=100, seed=1):
    rng = np.random.default_rng(seed)
    return [(float(s), bool(c)) for s, c in zip(rng.random(n), rng.random(n) < 0.8)]


@pytest.fixture
def bundle():
    return CurveBundle(
        curves={
            "sampled_entropy": sweep_curve(_oracle_scored(), GRID),
            "baseline_entropy": sweep_curve(_random_scored(), GRID),
        },
        dataset_label="target",
    )


# 1. Bundle


def test_bundle_requires_shared_grid():
    with pytest.raises(ConfigError):
        CurveBundle(
            curves={
                "a": sweep_curve(_random_scored(), [0.0, 0.1]),
                "b": sweep_curve(_random_scored(), [0.0, 0.2]),
            }
        )
    with pytest.raises(ConfigError):
        CurveBundle(curves={})


# 2. Curves CSV


def test_curves_csv_rows(tmp_path):
    single = CurveBundle(curves={"variation_ratio": sweep_curve(_oracle_scored(), [0.0, 0.1])})
    path = write_curves_csv(single, tmp_path / "curves.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "method,fraction,threshold,nra,cq,rq"
    assert len(lines) == 3
    # every rejected point is misclassified at 10%
    assert lines[2].endswith(",inf")


def test_curves_csv_sorted_and_deterministic(bundle, tmp_path):
    first = write_curves_csv(bundle, tmp_path / "a.csv").read_bytes()
    second = write_curves_csv(bundle, tmp_path / "b.csv").read_bytes()
    assert first == second
    methods = [line.split(",")[0] for line in first.decode("utf-8").splitlines()[1:]]
    assert methods == ["baseline_entropy"] * len(GRID) + ["sampled_entropy"] * len(GRID)


def test_curves_csv_round_trip(bundle, tmp_path):
    loaded = load_curves_csv(write_curves_csv(bundle, tmp_path / "curves.csv"), dataset_label="target")
    assert sorted(loaded.methods) == sorted(bundle.methods)
    for method, curve in bundle.curves.items():
        for original, restored in zip(curve, loaded.curves[method]):
            for field in ("rejected_fraction", "nra", "cq", "rq", "threshold"):
                a, b = getattr(original, field), getattr(restored, field)
                assert (math.isnan(a) and math.isnan(b)) or a == b


def test_load_curves_csv_wrong_columns(tmp_path):
    path = tmp_path / "curves.csv"
    path.write_text("fraction,nra\n0.0,1.0\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_curves_csv(path)


# 3. SVG panels


@pytest.mark.parametrize("panel", ["nra", "cq", "rq"])
def test_svg_panel_structure(bundle, tmp_path, panel):
    path = render_curves_svg(bundle, panel, tmp_path / f"{panel}.svg")
    text = path.read_text(encoding="utf-8")
    assert text.startswith("<svg")
    root = ET.fromstring(text)
    assert len(root.findall(f"{SVG_NS}polyline")) == 2
    legend = [t.text for t in root.iter(f"{SVG_NS}text")]
    assert "sampled_entropy" in legend and "baseline_entropy" in legend
    assert {"0%", "10%", "50%"} <= set(legend)


def test_svg_axis_labels_and_grid(bundle, tmp_path):
    """
    Test that a panel labels both axes and draws one dashed grid line per y tick.
    """
    root = ET.parse(render_curves_svg(bundle, "cq", tmp_path / "cq.svg")).getroot()
    texts = [t.text for t in root.iter(f"{SVG_NS}text")]
    assert "Rejected fraction" in texts
    assert "Classification quality" in texts
    grids = [g for g in root.findall(f"{SVG_NS}g") if g.get("stroke-dasharray")]
    assert len(grids) == 1
    assert len(grids[0].findall(f"{SVG_NS}line")) == 6


def test_svg_marks_infinite_rejection_quality(bundle, tmp_path):
    root = ET.parse(render_curves_svg(bundle, "rq", tmp_path / "rq.svg")).getroot()
    # the oracle curve has rq = inf until every misclassified point is rejected (10% and 20%)
    assert len(root.findall(f"{SVG_NS}circle")) >= 2


def test_svg_deterministic(bundle, tmp_path):
    first = render_curves_svg(bundle, "nra", tmp_path / "one.svg").read_bytes()
    second = render_curves_svg(bundle, "nra", tmp_path / "two.svg").read_bytes()
    assert first == second


def test_svg_unknown_panel(bundle, tmp_path):
    with pytest.raises(ConfigError):
        render_curves_svg(bundle, "auc", tmp_path / "x.svg")


def test_svg_skips_undefined_points(tmp_path):
    curve = [
        RejectionCurvePoint(rejected_fraction=0.0, nra=0.5, cq=0.5, rq=1.0, threshold=math.inf),
        RejectionCurvePoint(rejected_fraction=1.0, nra=float("nan"), cq=0.5, rq=1.0, threshold=0.0),
    ]
    root = ET.parse(render_curves_svg(CurveBundle({"m": curve}), "nra", tmp_path / "n.svg")).getroot()
    points = root.find(f"{SVG_NS}polyline").get("points").split()
    assert len(points) == 1


# 4. Tables and terminal charts


def test_summary_table_oracle(bundle):
    text = summary_table(bundle, fractions=(0.1, 0.2, 0.3))
    oracle_row = next(line for line in text.splitlines() if "sampled_entropy" in line)
    assert "80.00%" in oracle_row  # accuracy at 0%
    assert "100.00%" in oracle_row  # NRA at 20%
    assert "inf" in oracle_row
    assert "NRA 10%" in text and "RQ 30%" in text


def test_summary_table_missing_fraction(bundle):
    with pytest.raises(ConfigError):
        summary_table(bundle, fractions=(0.15,))


def test_ascii_panel(bundle):
    chart = ascii_panel(bundle, "nra", height=6)
    assert chart.startswith("Non-rejected accuracy vs rejected fraction")
    assert "[1] sampled_entropy" in chart and "[2] baseline_entropy" in chart
    with pytest.raises(ConfigError):
        ascii_panel(bundle, "f1")
