"""Macrostate reports: all four detectors over one log, flattened to metrics.

A report is a pure function of (log, optional control log, detector
parameters, scenario config). The CSV form is ``metric,value,decimal`` with
exact values (integers, or ``num/den`` for rationals) and a 6-place decimal
rendering; undefined values are written as ``NONE`` in both columns.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .detectors import (
    CreditEpisode,
    DetectorParams,
    InsuranceReport,
    InvestmentReport,
    TokenChainReport,
    UnresolvedImbalance,
    cooperating_pairs,
    detect_insurance,
    detect_investment,
    detect_token_chains,
    received_volume,
    scan_credit,
)
from .events import EventLog, Kind
from .scenarios import ScenarioConfig

Value = Union[int, Fraction, None]
NONE = "NONE"


@dataclass
class MacrostateReport:
    kind: str
    seed: int
    digest: int
    horizon: int
    n_agents: int
    params: DetectorParams
    credit_episodes: list[CreditEpisode]
    unresolved: list[UnresolvedImbalance]
    episodes_per_pair: dict[tuple[int, int], int]
    cooperating_pairs: int
    insurance: InsuranceReport
    tokens: TokenChainReport
    investment: InvestmentReport
    transfer_volume: int = 0
    defector_received: Optional[Fraction] = None
    cooperator_received: Optional[Fraction] = None
    event_counts: dict[str, int] = field(default_factory=dict)

    def metrics(self) -> list[tuple[str, Value]]:
        """Named scalar metrics in a fixed order."""
        ins, tok, inv = self.insurance, self.tokens, self.investment
        eps = len(self.credit_episodes)
        delays = [a.delay for a in inv.acts]
        rows: list[tuple[str, Value]] = [
            ("credit_episodes", eps),
            ("credit_unresolved", len(self.unresolved)),
            ("credit_pairs_with_episodes",
             len({tuple(sorted(p)) for p in self.episodes_per_pair})),
            ("cooperating_pairs", self.cooperating_pairs),
            ("credit_episodes_per_cooperating_pair",
             Fraction(eps, self.cooperating_pairs) if self.cooperating_pairs else None),
            ("insurance_need_contingency_lift", ins.need_contingency_lift),
            ("insurance_buffering_index", ins.buffering_index),
            ("insurance_sharing_clusters", len(ins.sharing_clusters)),
            ("insurance_need_volume", ins.need_volume),
            ("insurance_base_rate", ins.base_rate),
            ("token_stranger_cooperation_fraction", tok.stranger_cooperation_fraction),
            ("token_stranger_cooperation_count", tok.paired_stranger_gives),
            ("token_stranger_gives", tok.stranger_gives),
            ("token_max_chain_length", tok.max_chain_length),
            ("token_chains", len(tok.chains)),
            ("token_hops", tok.hops),
            ("investment_acts", len(inv.acts)),
            ("investment_mean_roi", inv.mean_roi),
            ("investment_funded_fraction", inv.funded_fraction),
            ("investment_min_delay", min(delays) if delays else None),
            ("investment_dangling", len(inv.dangling)),
            ("transfer_volume", self.transfer_volume),
            ("defector_received_per_capita", self.defector_received),
            ("cooperator_received_per_capita", self.cooperator_received),
        ]
        return rows

    def metric(self, name: str) -> Value:
        for key, value in self.metrics():
            if key == name:
                return value
        raise KeyError(name)

    def to_rows(self) -> list[tuple[str, str, str]]:
        return [(name, render_exact(v), render_decimal(v)) for name, v in self.metrics()]

    def to_csv(self) -> str:
        lines = ["metric,value,decimal"]
        lines += [",".join(row) for row in self.to_rows()]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        out = [
            f"run: kind={self.kind} seed={self.seed} config={self.digest:016x} "
            f"agents={self.n_agents} horizon={self.horizon}",
            "events: " + ", ".join(f"{k}={v}" for k, v in sorted(self.event_counts.items())),
            "",
            "credit",
            f"  episodes: {len(self.credit_episodes)} "
            f"(delta={self.params.delta}, epsilon={self.params.epsilon}, "
            f"W={self.params.window}, d_min={self.params.d_min})",
            f"  unresolved imbalances: {len(self.unresolved)}",
            f"  cooperating pairs: {self.cooperating_pairs}",
        ]
        top = sorted(self.episodes_per_pair.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
        for (lender, borrower), n in top:
            out.append(f"    {lender} -> {borrower}: {n}")
        ins = self.insurance
        out += [
            "",
            "insurance",
            f"  need-contingency lift: {_fmt(ins.need_contingency_lift)}",
            f"  buffering index: {_fmt(ins.buffering_index)}",
            f"  need-targeted volume: {ins.need_volume} of {ins.total_volume}",
            f"  sharing clusters: {len(ins.sharing_clusters)}",
        ]
        for c in ins.sharing_clusters[:5]:
            out.append("    {" + ", ".join(map(str, c)) + "}")
        tok = self.tokens
        out += [
            "",
            "tokens",
            f"  hops: {tok.hops} ({tok.valid_hops} paired with a reciprocal gift)",
            f"  chains: {len(tok.chains)}, longest {tok.max_chain_length}",
            f"  stranger cooperation: {tok.paired_stranger_gives} of {tok.stranger_gives} "
            f"({_fmt(tok.stranger_cooperation_fraction)})",
        ]
        inv = self.investment
        out += [
            "",
            "investment",
            f"  acts: {len(inv.acts)}, dangling: {len(inv.dangling)}",
            f"  mean ROI: {_fmt(inv.mean_roi)}",
            f"  funded: {inv.funded_projects} of {inv.posted_projects} "
            f"({_fmt(inv.funded_fraction)})",
        ]
        if self.defector_received is not None:
            out += [
                "",
                "defectors (final quarter, received per capita)",
                f"  defectors: {_fmt(self.defector_received)}",
                f"  cooperators: {_fmt(self.cooperator_received)}",
            ]
        return "\n".join(out) + "\n"


def render_exact(v: Value) -> str:
    if v is None:
        return NONE
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    return str(v)


def render_decimal(v: Value, places: int = 6) -> str:
    """Exact rational rounded half-to-even at ``places`` decimals."""
    if v is None:
        return NONE
    scaled = round(Fraction(v) * 10**places)
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def _fmt(v: Value) -> str:
    if v is None:
        return NONE
    if isinstance(v, Fraction) and v.denominator != 1:
        return f"{render_decimal(v)} ({render_exact(v)})"
    return render_exact(v)


def summarize(
    log: EventLog,
    control_log: Optional[EventLog],
    params: DetectorParams,
    config: ScenarioConfig,
) -> MacrostateReport:
    """Run every detector over ``log``.

    ``control_log``, when given, must be the giving-disabled twin; it only
    feeds the buffering index.
    """
    episodes, unresolved = scan_credit(
        log, params.delta, params.epsilon, params.window, params.d_min
    )
    per_pair = Counter((ep.lender, ep.borrower) for ep in episodes)
    nu = params.need_threshold(config)

    defector_rx = cooperator_rx = None
    defectors = config.defectors()
    if defectors:
        start = config.horizon - config.horizon // 4
        coop = [i for i in range(config.n_agents) if i not in set(defectors)]
        defector_rx = Fraction(received_volume(log, defectors, start), len(defectors))
        if coop:
            cooperator_rx = Fraction(received_volume(log, coop, start), len(coop))

    counts = Counter(e.kind.value for e in log)
    return MacrostateReport(
        kind=config.kind,
        seed=log.header.seed,
        digest=log.header.digest,
        horizon=config.horizon,
        n_agents=config.n_agents,
        params=params,
        credit_episodes=episodes,
        unresolved=unresolved,
        episodes_per_pair=dict(sorted(per_pair.items())),
        cooperating_pairs=len(cooperating_pairs(log)),
        insurance=detect_insurance(log, control_log, nu, config),
        tokens=detect_token_chains(log),
        investment=detect_investment(log, config),
        transfer_volume=sum(e.amount for e in log if e.kind is Kind.GIVE),
        defector_received=defector_rx,
        cooperator_received=cooperator_rx,
        event_counts=dict(sorted(counts.items())),
    )
