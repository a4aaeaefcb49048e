"""Macrostate detectors over interaction logs.

Each detector reads transfers (and, where resources matter, replays a light
resource ledger from the config's endowments). Nothing here looks at agent
internals: a report is a pure function of log bytes, config and parameters.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import LogTooLarge, PairingMismatch
from .events import Event, EventLog, Kind
from .scenarios import ScenarioConfig, config_digest

ORACLE_MAX_EVENTS = 64


@dataclass(frozen=True)
class DetectorParams:
    delta: int = 5
    epsilon: int = 0
    window: int = 50
    d_min: int = 2
    nu: Optional[int] = None  # None: use the scenario's need threshold

    def need_threshold(self, config: Optional[ScenarioConfig]) -> int:
        if self.nu is not None:
            return self.nu
        return config.need_threshold if config is not None else 10


# ---------------------------------------------------------------------------
# credit


@dataclass(frozen=True, order=True)
class CreditEpisode:
    open_tick: int
    lender: int
    borrower: int
    close_tick: int
    peak_imbalance: int


@dataclass(frozen=True, order=True)
class UnresolvedImbalance:
    open_tick: int
    lender: int
    borrower: int
    close_tick: Optional[int]  # None: still open when the log ends
    peak_imbalance: int


def _balance_series(events: Iterable[Event]) -> dict[tuple[int, int], list[tuple[int, int]]]:
    """For each pair a < b: [(tick, B_ab at end of tick)] at ticks where it moved."""
    series: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for e in events:
        if e.kind is not Kind.GIVE:
            continue
        a, b = (e.actor, e.target) if e.actor < e.target else (e.target, e.actor)
        d = e.amount if e.actor == a else -e.amount
        s = series.setdefault((a, b), [])
        if s and s[-1][0] == e.tick:
            s[-1] = (e.tick, s[-1][1] + d)
        else:
            s.append((e.tick, (s[-1][1] if s else 0) + d))
    return series


def scan_credit(
    log: EventLog | Sequence[Event], delta: int, epsilon: int, window: int, d_min: int
) -> tuple[list[CreditEpisode], list[UnresolvedImbalance]]:
    if not (delta > epsilon >= 0 and window > d_min >= 1):
        raise ValueError("credit parameters need delta > epsilon >= 0 and W > d_min >= 1")
    episodes: list[CreditEpisode] = []
    unresolved: list[UnresolvedImbalance] = []
    for (a, b), s in _balance_series(log).items():
        for lender, borrower, sign in ((a, b, 1), (b, a, -1)):
            open_tick = None
            peak = 0
            for tick, bal in s:
                v = sign * bal
                if open_tick is None:
                    if v > delta:
                        open_tick, peak = tick, v
                elif v <= epsilon:
                    dur = tick - open_tick
                    if dur > window:
                        unresolved.append(
                            UnresolvedImbalance(open_tick, lender, borrower, tick, peak))
                    elif dur >= d_min:
                        episodes.append(CreditEpisode(open_tick, lender, borrower, tick, peak))
                    open_tick = None
                else:
                    peak = max(peak, v)
            if open_tick is not None:
                unresolved.append(UnresolvedImbalance(open_tick, lender, borrower, None, peak))
    episodes.sort()
    unresolved.sort(key=lambda u: (u.open_tick, u.lender, u.borrower))
    return episodes, unresolved


def detect_credit(
    log: EventLog | Sequence[Event], delta: int, epsilon: int, window: int, d_min: int
) -> list[CreditEpisode]:
    """Balance excursions above ``delta`` repaid to ``epsilon`` within ``window`` ticks."""
    return scan_credit(log, delta, epsilon, window, d_min)[0]


def oracle_credit(
    log: EventLog | Sequence[Event], delta: int, epsilon: int, window: int, d_min: int
) -> list[CreditEpisode]:
    """Exhaustive reference for :func:`detect_credit` on small logs.

    Tries every (lender, borrower, t1, t2) and keeps those satisfying the
    episode definition directly, recomputing balances from scratch each time.
    """
    events = list(log)
    if len(events) > ORACLE_MAX_EVENTS:
        raise LogTooLarge(f"oracle limited to {ORACLE_MAX_EVENTS} events, got {len(events)}")
    gives = [e for e in events if e.kind is Kind.GIVE]
    agents = sorted({e.actor for e in gives} | {e.target for e in gives})
    ticks = sorted({e.tick for e in gives})

    def bal(i: int, j: int, t: int) -> int:
        return sum(
            e.amount if e.actor == i else -e.amount
            for e in gives
            if e.tick <= t and {e.actor, e.target} == {i, j}
        )

    def in_episode(i: int, j: int, upto: int) -> bool:
        # open at `upto` iff some earlier tick exceeded delta and the balance
        # has stayed above epsilon ever since
        prior = [t for t in ticks if t <= upto]
        for k, start in enumerate(prior):
            if bal(i, j, start) > delta and all(bal(i, j, u) > epsilon for u in prior[k:]):
                return True
        return False

    found = []
    for i in agents:
        for j in agents:
            if i == j:
                continue
            for x, t1 in enumerate(ticks):
                if bal(i, j, t1) <= delta:
                    continue
                if x > 0 and in_episode(i, j, ticks[x - 1]):
                    continue
                for y in range(x + 1, len(ticks)):
                    t2 = ticks[y]
                    span = ticks[x:y]
                    if not all(bal(i, j, u) > epsilon for u in span):
                        break
                    if bal(i, j, t2) <= epsilon:
                        if d_min <= t2 - t1 <= window:
                            peak = max(bal(i, j, u) for u in span)
                            found.append(CreditEpisode(t1, i, j, t2, peak))
                        break
    return sorted(found)


def cooperating_pairs(log: EventLog | Sequence[Event]) -> set[tuple[int, int]]:
    """Unordered pairs with at least one GIVE in each direction."""
    directed = {(e.actor, e.target) for e in log if e.kind is Kind.GIVE}
    return {(a, b) for a, b in directed if a < b and (b, a) in directed}


# ---------------------------------------------------------------------------
# insurance


@dataclass
class InsuranceReport:
    need_contingency_lift: Optional[Fraction]
    buffering_index: Optional[Fraction]
    sharing_clusters: list[list[int]]
    need_volume: int = 0
    total_volume: int = 0
    need_transfers: int = 0
    base_rate: Optional[Fraction] = None


@dataclass
class _LedgerTrace:
    need_volume: int = 0
    total_volume: int = 0
    need_transfers: int = 0
    below_agent_ticks: int = 0
    agent_ticks: int = 0
    need_edges: set = field(default_factory=set)
    end_of_tick: list[list[int]] = field(default_factory=list)


def _trace_resources(log: EventLog, config: ScenarioConfig, nu: int) -> _LedgerTrace:
    """Replay resources from endowments, sampling need at decision time."""
    n, horizon = config.n_agents, config.horizon
    res = [config.endowment] * n
    out = _LedgerTrace()
    events = log.events
    k = 0
    # MINT and other tick-0 setup precede income; treat them as pre-tick
    for t in range(horizon):
        # income of tick t
        while k < len(events) and events[k].tick == t and events[k].kind in (Kind.INCOME, Kind.MINT):
            e = events[k]
            if e.kind is Kind.INCOME:
                res[e.target] += e.amount
            k += 1
        out.below_agent_ticks += sum(1 for r in res if r < nu)
        out.agent_ticks += n
        while k < len(events) and events[k].tick == t:
            e = events[k]
            kd = e.kind
            if kd is Kind.GIVE:
                if res[e.target] < nu:
                    out.need_volume += e.amount
                    out.need_transfers += 1
                    out.need_edges.add((e.actor, e.target))
                out.total_volume += e.amount
                res[e.actor] -= e.amount
                res[e.target] += e.amount
            elif kd in (Kind.SHOCK, Kind.CONSUME, Kind.INVEST):
                res[e.actor if kd is Kind.INVEST else e.target] -= e.amount
            elif kd in (Kind.INCOME, Kind.PROJECT_PAYOUT, Kind.PROJECT_FAIL):
                res[e.target] += e.amount
            k += 1
        out.end_of_tick.append(list(res))
    return out


def _change_variance(config: ScenarioConfig, path: list[list[int]]) -> Fraction:
    """Cross-agent variance of resource change since the start, averaged over ticks.

    At each tick the change of agent i is ``r_i(t) - endowment``; its
    population variance across agents measures how far shocks have spread
    the population apart. A transfer answering last tick's shock cannot
    shrink the variance of one-tick differences (help always lands a tick
    late), but it does pull the struck agent back toward the others, which
    is what this captures.
    """
    n = config.n_agents
    if not path or n == 0:
        return Fraction(0)
    e = config.endowment
    acc = Fraction(0)
    for row in path:
        s = 0
        s2 = 0
        for r in row:
            d = r - e
            s += d
            s2 += d * d
        acc += Fraction(s2 * n - s * s, n * n)
    return acc / len(path)


def _components(edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    adj: dict[int, set[int]] = defaultdict(set)
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen: set[int] = set()
    comps = []
    for start in sorted(adj):
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def detect_insurance(
    log: EventLog,
    control_log: Optional[EventLog],
    nu: int,
    config: ScenarioConfig,
) -> InsuranceReport:
    """Need-contingent giving and buffering against a giving-disabled twin.

    ``config`` is the treatment configuration; it supplies endowments and the
    horizon and lets the control pairing be checked exactly.
    """
    tr = _trace_resources(log, config, nu)
    base = Fraction(tr.below_agent_ticks, tr.agent_ticks) if tr.agent_ticks else Fraction(0)
    lift = None
    if tr.total_volume > 0 and base > 0:
        lift = Fraction(tr.need_volume, tr.total_volume) / base

    buffering = None
    if control_log is not None:
        ctrl_cfg = config.with_switch("giving_disabled")
        if (
            control_log.header.seed != log.header.seed
            or control_log.header.digest != config_digest(ctrl_cfg)
            or log.header.digest != config_digest(config)
        ):
            raise PairingMismatch("control log is not the giving-disabled twin of this run")
        ctr = _trace_resources(control_log, ctrl_cfg, nu)
        v_t = _change_variance(config, tr.end_of_tick)
        v_c = _change_variance(ctrl_cfg, ctr.end_of_tick)
        if v_c > 0:
            buffering = 1 - v_t / v_c
        elif v_t == 0:
            buffering = Fraction(0)

    mutual = {(a, b) for a, b in tr.need_edges if a < b and (b, a) in tr.need_edges}
    return InsuranceReport(
        need_contingency_lift=lift,
        buffering_index=buffering,
        sharing_clusters=_components(mutual),
        need_volume=tr.need_volume,
        total_volume=tr.total_volume,
        need_transfers=tr.need_transfers,
        base_rate=base,
    )


# ---------------------------------------------------------------------------
# tokens


@dataclass(frozen=True)
class TokenHop:
    tick: int
    token: int
    payer: int
    payee: int
    valid: bool


@dataclass
class TokenChainReport:
    chains: list[list[TokenHop]]
    stranger_cooperation_fraction: Optional[Fraction]
    max_chain_length: int
    stranger_gives: int = 0
    paired_stranger_gives: int = 0
    hops: int = 0
    valid_hops: int = 0


def _pair_token_gives(events: Sequence[Event]) -> tuple[dict[int, int], dict[int, int]]:
    """Match each TOKEN_PAY with one reciprocal GIVE in the same tick.

    Returns (pay index -> give index, give index -> pay index). The nearest
    unmatched GIVE before the payment wins, else the first one after it.
    """
    pay_to_give: dict[int, int] = {}
    give_to_pay: dict[int, int] = {}
    by_tick: dict[int, list[int]] = defaultdict(list)
    for idx, e in enumerate(events):
        by_tick[e.tick].append(idx)
    for tick_idx in by_tick.values():
        for idx in tick_idx:
            pay = events[idx]
            if pay.kind is not Kind.TOKEN_PAY:
                continue
            match = None
            for j in reversed(tick_idx):
                g = events[j]
                if (j < idx and j not in give_to_pay and g.kind is Kind.GIVE
                        and g.actor == pay.target and g.target == pay.actor):
                    match = j
                    break
            if match is None:
                for j in tick_idx:
                    g = events[j]
                    if (j > idx and j not in give_to_pay and g.kind is Kind.GIVE
                            and g.actor == pay.target and g.target == pay.actor):
                        match = j
                        break
            if match is not None:
                pay_to_give[idx] = match
                give_to_pay[match] = idx
    return pay_to_give, give_to_pay


def detect_token_chains(log: EventLog | Sequence[Event]) -> TokenChainReport:
    events = list(log)
    pay_to_give, give_to_pay = _pair_token_gives(events)

    paths: dict[int, list[TokenHop]] = defaultdict(list)
    for idx, e in enumerate(events):
        if e.kind is Kind.TOKEN_PAY:
            paths[e.token].append(TokenHop(e.tick, e.token, e.actor, e.target, idx in pay_to_give))

    chains: list[list[TokenHop]] = []
    for token in sorted(paths):
        run: list[TokenHop] = []
        for hop in paths[token] + [None]:
            if hop is not None and hop.valid:
                run.append(hop)
                continue
            if len(run) >= 2:
                chains.append(run)
            run = []

    met: set[tuple[int, int]] = set()
    stranger = paired = 0
    for idx, e in enumerate(events):
        if e.kind is Kind.GIVE or e.kind is Kind.REFUSE:
            pair = (e.actor, e.target) if e.actor < e.target else (e.target, e.actor)
            if e.kind is Kind.GIVE and pair not in met:
                stranger += 1
                if idx in give_to_pay:
                    paired += 1
            met.add(pair)

    hops = sum(len(p) for p in paths.values())
    return TokenChainReport(
        chains=chains,
        stranger_cooperation_fraction=Fraction(paired, stranger) if stranger else None,
        max_chain_length=max((len(c) for c in chains), default=0),
        stranger_gives=stranger,
        paired_stranger_gives=paired,
        hops=hops,
        valid_hops=len(pay_to_give),
    )


# ---------------------------------------------------------------------------
# investment


@dataclass(frozen=True)
class InvestmentAct:
    investor: int
    project: int
    cost: int
    realized_return: Fraction
    delay: int
    invest_tick: int


@dataclass
class InvestmentReport:
    acts: list[InvestmentAct]
    mean_roi: Optional[Fraction]
    funded_fraction: Optional[Fraction]
    dangling: list[tuple[int, int, int]] = field(default_factory=list)  # (investor, project, cost)
    posted_projects: int = 0
    funded_projects: int = 0


def detect_investment(log: EventLog | Sequence[Event], config: ScenarioConfig) -> InvestmentReport:
    invests: dict[tuple[int, int], list[Event]] = defaultdict(list)
    settled: dict[tuple[int, int], Event] = {}
    pooled: dict[int, int] = defaultdict(int)
    last_tick = -1
    for e in log:
        last_tick = e.tick
        if e.kind is Kind.INVEST:
            invests[(e.actor, e.project)].append(e)
            pooled[e.project] += e.amount
        elif e.kind in (Kind.PROJECT_PAYOUT, Kind.PROJECT_FAIL):
            settled[(e.target, e.project)] = e

    acts: list[InvestmentAct] = []
    dangling: list[tuple[int, int, int]] = []
    for key in sorted(invests):
        group = invests[key]
        cost_total = sum(e.amount for e in group)
        s = settled.get(key)
        for e in group:
            if s is None:
                dangling.append((e.actor, e.project, e.amount))
                continue
            # several contributions to one project share its settlement pro rata
            share = Fraction(s.amount * e.amount, cost_total)
            acts.append(InvestmentAct(e.actor, e.project, e.amount, share,
                                      s.tick - e.tick, e.tick))
    acts.sort(key=lambda a: (a.invest_tick, a.project, a.investor))

    cost = sum(a.cost for a in acts)
    mean_roi = sum((a.realized_return for a in acts), Fraction(0)) / cost if cost else None

    posted = config.posted_project_ticks()
    funded = 0
    for pid, open_tick in enumerate(posted):
        if pooled.get(pid, 0) >= config.project_threshold and pooled.get(pid, 0) > 0:
            funded += 1
    return InvestmentReport(
        acts=acts,
        mean_roi=mean_roi,
        funded_fraction=Fraction(funded, len(posted)) if posted else None,
        dangling=dangling,
        posted_projects=len(posted),
        funded_projects=funded,
    )


# ---------------------------------------------------------------------------
# transfers by group


def received_volume(
    log: EventLog | Sequence[Event], agents: Iterable[int], start_tick: int
) -> int:
    group = set(agents)
    return sum(
        e.amount for e in log
        if e.kind is Kind.GIVE and e.tick >= start_tick and e.target in group
    )
