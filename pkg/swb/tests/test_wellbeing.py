import json

import pandas as pd
import pytest

from swb.errors import WellbeingError
from swb.rng import PortableRandom
from swb.wellbeing import (COMPONENTS, PANEL_COLUMNS, PANEL_COMPONENTS, ComponentCode, PolarityDistribution,
                           WellBeingPanel, build_panel, component_score, compose_swbi, integrate_period,
                           mean_identity_gap, panel_series, read_estimates, summarize_panel)

# средние значения компонент и индекса по годам (emo, fun, rel, res, sat, tru, vit, wor -> swbi)
YEARLY_AVERAGES = [
    ((60.55, 67.76, 34.10, 55.10, 43.88, 59.22, 53.91, 16.44), 48.87),
    ((57.32, 73.31, 37.35, 57.19, 55.03, 64.04, 58.04, 15.50), 52.22),
    ((48.24, 68.26, 39.73, 56.11, 52.37, 62.59, 55.15, 15.10), 49.69),
    ((49.50, 54.57, 55.35, 54.30, 36.72, 40.40, 57.81, 39.33), 48.50),
]


def polarity(p_neg, p_neu, p_pos, n_docs=10):
    return PolarityDistribution(p_neg, p_neu, p_pos, n_docs=n_docs)


@pytest.mark.parametrize("components, swbi", YEARLY_AVERAGES)
def test_yearly_averages_reproduce_published_index(components, swbi):
    scores = dict(zip(PANEL_COMPONENTS, components))
    assert compose_swbi(scores) == pytest.approx(swbi, abs=0.005)
    assert compose_swbi(list(components)) == pytest.approx(swbi, abs=0.005)


@pytest.mark.parametrize("d, expected", [
    (polarity(0.2, 0.3, 0.5), 100 * 0.5 / 0.7),
    (polarity(0.0, 1.0, 0.0), 50.0),
    (polarity(0.0, 0.4, 0.6), 100.0),
    (polarity(0.5, 0.5, 0.0), 0.0),
])
def test_component_score(d, expected):
    assert component_score(d) == pytest.approx(expected)


def test_polarity_distribution_validation():
    with pytest.raises(WellbeingError, match="sum to 1"):
        PolarityDistribution(0.2, 0.2, 0.2)
    with pytest.raises(WellbeingError, match="nonnegative"):
        PolarityDistribution(-0.1, 0.6, 0.5)


def test_polarity_from_probs_drops_off_topic_mass():
    d = PolarityDistribution.from_probs({"off": 0.5, "-1": 0.1, "0": 0.2, "1": 0.2})
    assert (d.p_neg, d.p_neu, d.p_pos) == pytest.approx((0.2, 0.4, 0.4))
    with pytest.raises(WellbeingError, match="missing"):
        PolarityDistribution.from_probs({"-1": 0.5, "1": 0.5})


def test_compose_swbi_names_missing_components():
    scores = {code: 50.0 for code in PANEL_COMPONENTS if code != "tru"}
    with pytest.raises(WellbeingError, match="tru"):
        compose_swbi(scores)
    with pytest.raises(WellbeingError, match="expected 8"):
        compose_swbi([50.0] * 7)


def test_compose_swbi_rejects_out_of_range_scores():
    with pytest.raises(WellbeingError, match=r"\[0, 100\]"):
        compose_swbi([50.0] * 7 + [120.0])


def test_compose_swbi_bounds():
    assert compose_swbi([0.0] * 8) == 0.0
    assert compose_swbi([100.0] * 8) == 100.0
    assert compose_swbi({code: 70.0 for code in ComponentCode}) == pytest.approx(70.0)


def test_compose_swbi_ignores_component_order():
    values = [61.0, 12.5, 80.0, 33.3, 47.0, 99.0, 5.0, 70.0]
    shuffled = dict(zip(reversed(COMPONENTS), reversed(values)))
    assert compose_swbi(shuffled) == pytest.approx(compose_swbi(values), abs=1e-12)
    assert compose_swbi(values[::-1]) == pytest.approx(compose_swbi(values), abs=1e-12)
    assert compose_swbi(values[3:] + values[:3]) == pytest.approx(sum(values) / 8, abs=1e-12)


def test_component_code_parse():
    assert ComponentCode.parse(" EMO ") is ComponentCode.EMO
    with pytest.raises(WellbeingError, match="unknown component"):
        ComponentCode.parse("joy")


def test_integrate_period_sums_available_days():
    daily = pd.Series([40.0, 60.0, 50.0, 10.0],
                      index=pd.to_datetime(["2013-01-02", "2013-01-15", "2013-01-31", "2013-03-01"]))
    frame = integrate_period(daily, "month")
    assert frame["period"].tolist() == ["2013-01", "2013-03"]
    assert frame["value"].tolist() == pytest.approx([150.0, 10.0])
    assert frame["count"].tolist() == [3, 1]

    averaged = integrate_period(daily, "year", average=True)
    assert averaged["value"].tolist() == pytest.approx([40.0])


def test_yearly_integral_is_the_sum_of_its_months():
    days = pd.date_range("2013-01-01", "2013-12-31", freq="D")
    daily = pd.Series(PortableRandom(7).uniform(days.size) * 100.0, index=days)
    daily = daily.drop(days[40:70])
    monthly = integrate_period(daily, "month")
    yearly = integrate_period(daily, "year")
    assert yearly["value"].tolist() == pytest.approx([monthly["value"].sum()], rel=1e-12)
    assert yearly["count"].tolist() == [monthly["count"].sum()] == [days.size - 30]


def test_integrate_period_rejects_empty_and_unknown():
    with pytest.raises(WellbeingError, match="empty"):
        integrate_period(pd.Series([], dtype=float))
    daily = pd.Series([1.0], index=pd.to_datetime(["2013-01-01"]))
    with pytest.raises(WellbeingError, match="unknown period"):
        integrate_period(daily, "decade")


def full_cell(period, unit, pos=0.6, n_docs=10):
    return {(period, unit, code): polarity(1.0 - pos, 0.0, pos, n_docs=n_docs) for code in ComponentCode}


def test_build_panel_complete_and_incomplete_rows():
    estimates = full_cell("2013-01-01", "north", pos=0.6)
    estimates.update(full_cell("2013-01-02", "north", pos=0.3, n_docs=4))
    del estimates[("2013-01-02", "north", ComponentCode.WOR)]
    estimates[("2013-01-02", "north", ComponentCode.EMO)] = polarity(0.0, 1.0, 0.0, n_docs=12)

    panel = build_panel(estimates)
    first, second = panel.rows
    assert first.swbi == pytest.approx(60.0)
    assert first.n_docs == 10
    assert second.swbi is None
    assert second.scores["wor"] is None
    assert second.scores["emo"] == 50.0
    assert second.unpolarized == ("emo",)
    assert second.n_docs == 12
    assert panel.complete_rows() == [first]
    assert mean_identity_gap(panel.rows) < 1e-12


def test_panel_frame_and_csv(tmp_path):
    estimates = full_cell("2013-01-01", "all")
    estimates.update(full_cell("2013-01-02", "all", pos=0.8))
    panel = build_panel(estimates)
    frame = panel.to_frame()
    assert list(frame.columns) == list(PANEL_COLUMNS)

    path = panel.to_csv(tmp_path / "panel.csv")
    loaded = WellBeingPanel.from_csv(path)
    assert [row.period for row in loaded.rows] == ["2013-01-01", "2013-01-02"]
    assert [row.swbi for row in loaded.rows] == pytest.approx([60.0, 80.0])


def test_panel_csv_keeps_unpolarized_flags(tmp_path):
    estimates = full_cell("2013-01-01", "all")
    estimates[("2013-01-01", "all", ComponentCode.EMO)] = polarity(0.0, 1.0, 0.0)
    estimates[("2013-01-01", "all", ComponentCode.VIT)] = polarity(0.0, 1.0, 0.0)
    estimates.update(full_cell("2013-01-02", "all"))
    path = build_panel(estimates).to_csv(tmp_path / "panel.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].endswith(",swbi,n_docs,unpolarized")
    assert lines[1].endswith(",emo;vit")
    assert lines[2].endswith(",")
    loaded = WellBeingPanel.from_csv(path)
    assert [row.unpolarized for row in loaded.rows] == [("emo", "vit"), ()]
    legacy = loaded.to_frame().drop(columns=["unpolarized"])
    assert WellBeingPanel.from_frame(legacy).rows[0].unpolarized == ()


def test_panel_requires_all_columns():
    with pytest.raises(WellbeingError, match="missing columns"):
        WellBeingPanel.from_frame(pd.DataFrame({"period": ["2013-01-01"]}))


def test_read_estimates_single_and_cell_files(tmp_path):
    single = {"component": "emo", "period": "2013-01-01", "unit": "all",
              "probs": {"-1": 0.25, "0": 0.5, "1": 0.25}, "diagnostics": {"n_docs": 7}}
    cells = {"component": "sat", "cells": [
        {"period": "2013-01-01", "unit": "all", "probs": {"-1": 0.1, "0": 0.1, "1": 0.8}},
        {"period": "2013-01-02", "unit": "all", "probs": {"-1": 0.4, "0": 0.2, "1": 0.4}},
    ]}
    (tmp_path / "emo.json").write_text(json.dumps(single), encoding="utf-8")
    (tmp_path / "sat.json").write_text(json.dumps(cells), encoding="utf-8")

    estimates = read_estimates(tmp_path)
    assert len(estimates) == 3
    emo = estimates[("2013-01-01", "all", ComponentCode.EMO)]
    assert emo.n_docs == 7
    assert component_score(emo) == pytest.approx(50.0)
    assert component_score(estimates[("2013-01-01", "all", ComponentCode.SAT)]) == pytest.approx(800 / 9)


def test_read_estimates_errors(tmp_path):
    with pytest.raises(WellbeingError, match="no \\*.json"):
        read_estimates(tmp_path)
    (tmp_path / "bad.json").write_text(json.dumps({"period": "2013"}), encoding="utf-8")
    with pytest.raises(WellbeingError, match="component"):
        read_estimates(tmp_path)


def test_panel_series_and_summary():
    estimates = {}
    for day, pos in (("2013-01-01", 0.4), ("2013-01-02", 0.6), ("2014-02-01", 0.5)):
        estimates.update(full_cell(day, "all", pos=pos))
    panel = build_panel(estimates)

    series = panel_series(panel, "all")
    assert series.tolist() == pytest.approx([40.0, 60.0, 50.0])
    assert str(series.index[0].date()) == "2013-01-01"
    with pytest.raises(WellbeingError, match="unit"):
        panel_series(panel, "south")

    summary = summarize_panel(panel, "year")
    assert summary["period"].tolist() == ["2013", "2014"]
    assert summary["swbi"].tolist() == pytest.approx([50.0, 50.0])
    assert summary["rows"].tolist() == [2, 1]
