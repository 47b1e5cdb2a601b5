import json
import math
from pathlib import Path

import pytest

import riskalign

DATA = Path(__file__).resolve().parents[2] / "data"


def test_auc_with_ties():
    assert riskalign.roc_auc([0, 1, 0, 1], [0.1, 0.9, 0.5, 0.5]) == pytest.approx(0.875)
    assert riskalign.roc_auc([1, 1], [0.2, 0.3]) is None


def test_evaluate_counts():
    r = riskalign.evaluate([1, 0, 1, 0], [0.9, 0.8, 0.2, 0.1])
    assert (r["tp"], r["fp"], r["tn"], r["fn"]) == (1, 1, 1, 1)


def test_published_intervals():
    bounds = json.loads((DATA / "scorecard_intervals.json").read_text())["bounds"]
    probes = {0.05: "A", 0.10: "B", 0.15: "C", 0.22: "D", 0.26: "E", 0.30: "F"}
    assert {p: riskalign.assign_grade(p, bounds) for p in probes} == probes


def test_survey_and_rank_correlation():
    features, totals, ranking = riskalign.survey_ranking(DATA / "expert_survey.csv")
    assert sorted(totals, reverse=True) == [90, 80, 55, 55, 45, 19, 19, 17, 15, 5]
    assert ranking[0] == "r2_liquidity" and ranking[-1] == "r3_profitability"
    assert riskalign.spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert riskalign.kendall_tau_b([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)


def test_smote_ratio():
    x = [[float(i), float(i % 7)] for i in range(120)]
    y = [1 if i < 12 else 0 for i in range(120)]
    xs, ys = riskalign.smote(x, y, k=5, ratio=0.5, seed=3)
    assert xs[:120] == x
    assert sum(ys) == 54


def test_fit_predict_explain():
    x = [[i / 10.0, (i % 3) - 1.0] for i in range(-30, 30)]
    y = [1 if row[0] > 0 else 0 for row in x]
    model = riskalign.fit(x, y, "gbt", {"n_estimators": 10, "max_depth": 2}, seed=1)
    p = model.predict_proba(x)
    assert p[0] < 0.5 < p[-1]
    back = riskalign.Model.from_json(model.to_json())
    assert back.predict_proba(x) == p
    phi = riskalign.shapley_values(model, x[-1], x[::6])
    base = sum(model.predict_proba(x[::6])) / len(x[::6])
    assert math.isclose(sum(phi), p[-1] - base, abs_tol=1e-12)


def test_errors_surface_as_value_error():
    with pytest.raises(ValueError):
        riskalign.fit([[0.0], [1.0]], [1, 1], "lr")
    with pytest.raises(ValueError):
        riskalign.fit([[0.0], [1.0]], [0, 1], "svm")


def test_formatting():
    assert riskalign.format_percent(0.9539) == "95.39"
    assert riskalign.format_fraction(0.0536) == "0.0536"
    assert "section omitted" in riskalign.format_report({})
