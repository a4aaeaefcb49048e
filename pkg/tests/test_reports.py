from fractions import Fraction

import pytest

from reciprosim.detectors import DetectorParams
from reciprosim.engine import run
from reciprosim.events import read_log
from reciprosim.reports import render_decimal, render_exact, summarize
from reciprosim.scenarios import make_scenario


@pytest.mark.parametrize(
    "value, exact, decimal",
    [
        (None, "NONE", "NONE"),
        (0, "0", "0.000000"),
        (7, "7", "7.000000"),
        (Fraction(3, 7), "3/7", "0.428571"),
        (Fraction(-1, 3), "-1/3", "-0.333333"),
        (Fraction(1, 2_000_000), "1/2000000", "0.000000"),  # half to even
        (Fraction(3, 2_000_000), "3/2000000", "0.000002"),
        (Fraction(6, 3), "2", "2.000000"),
    ],
)
def test_rendering(value, exact, decimal):
    assert render_exact(value) == exact
    assert render_decimal(value) == decimal


def test_trade_baseline_is_empty():
    cfg = make_scenario("TRADE", {"horizon": 300})
    rep = summarize(run(cfg, 1), None, DetectorParams(), cfg)
    assert rep.credit_episodes == []
    assert rep.tokens.hops == 0 and rep.tokens.chains == []
    assert rep.investment.acts == []
    assert rep.insurance.need_contingency_lift is None
    assert rep.transfer_volume > 0


def test_credit_run_has_episodes():
    cfg = make_scenario("CREDIT", {"horizon": 400})
    rep = summarize(run(cfg, 1), None, DetectorParams(), cfg)
    assert rep.metric("credit_episodes") > 0
    assert rep.metric("cooperating_pairs") > 0


def test_report_from_disk_equals_in_memory(tmp_path):
    cfg = make_scenario("TOKEN", {"horizon": 80})
    log = run(cfg, 6)
    log.write(tmp_path / "t.log")
    params = DetectorParams()
    assert summarize(read_log(tmp_path / "t.log"), None, params, cfg) == summarize(
        log, None, params, cfg)


def test_csv_layout():
    cfg = make_scenario("INVESTMENT", {"N": 6, "horizon": 60})
    rep = summarize(run(cfg, 2), None, DetectorParams(), cfg)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "metric,value,decimal"
    names = [line.split(",")[0] for line in lines[1:]]
    assert names == [m for m, _ in rep.metrics()]
    assert len(set(names)) == len(names)
    row = dict((line.split(",")[0], line.split(",")[1:]) for line in lines[1:])
    assert row["investment_acts"][0] == str(len(rep.investment.acts))
    assert row["insurance_buffering_index"] == ["NONE", "NONE"]  # no control given


def test_text_report_mentions_every_detector():
    cfg = make_scenario("CREDIT", {"horizon": 200, "defector_fraction": Fraction(1, 10)})
    text = summarize(run(cfg, 1), None, DetectorParams(), cfg).to_text()
    for heading in ("credit", "insurance", "tokens", "investment", "defectors"):
        assert f"\n{heading}" in text
    assert "kind=CREDIT seed=1" in text


def test_defector_metrics_only_with_defectors():
    cfg = make_scenario("CREDIT", {"horizon": 200})
    rep = summarize(run(cfg, 1), None, DetectorParams(), cfg)
    assert rep.defector_received is None


def test_unknown_metric():
    cfg = make_scenario("TRADE", {"horizon": 5})
    with pytest.raises(KeyError):
        summarize(run(cfg, 1), None, DetectorParams(), cfg).metric("happiness")
