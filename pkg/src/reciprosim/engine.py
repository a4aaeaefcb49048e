"""Deterministic tick loop.

Phases per tick, each walking agents in ascending id:

1. income
2. project postings (no event; the schedule is part of the config)
3. decisions, each applied immediately so agent k sees agents < k
4. project settlement (refunds at deadline, payouts at maturity)
5. shocks, one draw per agent from the shock stream
6. consumption
7. strategy update (blocking)

Randomness comes from two SplitMix64 streams derived from the seed. The
decision stream is drawn only by the stranger-generosity check; the shock
stream draws once per agent per tick whenever ``p_shock > 0``. Keeping them
apart gives a giving-disabled control the same shocks as its treatment.
"""

from __future__ import annotations

from typing import Optional

from .agents import (
    ActionIntent,
    AgentState,
    Candidates,
    IntentKind,
    Observation,
    ProjectView,
    decide_action,
)
from .errors import HorizonExceeded
from .events import Event, EventLog, Kind, LogHeader, append_event
from .scenarios import ScenarioConfig, check_seed, config_digest
from .world import WorldState, new_world, replay  # noqa: F401  (re-export)


class _ResourceView:
    """Live read-only view of the agents' resources, indexed by id."""

    __slots__ = ("_agents",)

    def __init__(self, agents: list[AgentState]) -> None:
        self._agents = agents

    def __getitem__(self, i: int) -> int:
        return self._agents[i].resource

    def __len__(self) -> int:
        return len(self._agents)


class _Emitter:
    __slots__ = ("world", "out", "log")

    def __init__(self, world: WorldState, log: Optional[EventLog]) -> None:
        self.world = world
        self.out: list[Event] = []
        self.log = log

    def __call__(self, kind: Kind, actor=None, target=None, amount=None, token=None,
                 project=None) -> Event:
        w = self.world
        e = Event(w.tick, w.next_seq, kind, actor, target, amount, token, project)
        if self.log is not None:
            append_event(self.log, e, validate=w.check)
        w.apply(e)
        w.next_seq += 1
        self.out.append(e)
        return e


def init_world(
    config: ScenarioConfig, seed: int, log: Optional[EventLog] = None, check: bool = False
) -> WorldState:
    """Fresh world with tokens minted round-robin (token j to agent j mod N)."""
    check_seed(seed)
    world = new_world(config, seed, check=check)
    emit = _Emitter(world, log)
    n = config.n_agents
    for j in range(config.effective_tokens_per_agent * n):
        emit(Kind.MINT, target=j % n, token=j)
    return world


def step(world: WorldState, log: Optional[EventLog] = None) -> list[Event]:
    cfg = world.config
    if world.tick >= cfg.horizon:
        raise HorizonExceeded(f"tick {world.tick} is at horizon {cfg.horizon}")
    t = world.tick
    emit = _Emitter(world, log)
    agents = world.agents

    for a in agents:
        y = cfg.income_for(a.id, t)
        if y > 0:
            emit(Kind.INCOME, target=a.id, amount=y)

    world.post_projects(t)

    view = _ResourceView(agents)
    accepts = [a.policy.accepts_tokens and not a.policy.defector for a in agents]
    for a in agents:
        obs = Observation(
            tick=t,
            candidates=Candidates(view, accepts, exclude=a.id),
            projects=[
                ProjectView(p.id, p.multiplier, p.unit,
                            feasible=p.open_tick <= t < p.deadline and a.id not in p.contributions)
                for p in world.open_projects.values()
                if t < p.deadline
            ],
        )
        intent = decide_action(a, obs, world.decision_rng)
        _apply_intent(world, emit, a, intent)

    for pid in sorted(world.open_projects):
        p = world.open_projects[pid]
        if p.deadline == t and p.funded is None and p.pooled < p.threshold:
            for c in sorted(p.contributions):
                refund = p.contributions[c] * p.refund.numerator // p.refund.denominator
                emit(Kind.PROJECT_FAIL, target=c, amount=refund, project=pid)
        elif p.funded and p.maturity == t:
            for c in sorted(p.contributions):
                payout = p.contributions[c] * p.multiplier.numerator // p.multiplier.denominator
                emit(Kind.PROJECT_PAYOUT, target=c, amount=payout, project=pid)

    if cfg.p_shock > 0:
        rng = world.shock_rng
        for a in agents:
            if rng.bernoulli(cfg.p_shock):
                loss = min(cfg.shock_loss, a.resource)
                if loss > 0:
                    emit(Kind.SHOCK, target=a.id, amount=loss)

    if cfg.consumption > 0:
        for a in agents:
            c = min(cfg.consumption, a.resource)
            if c > 0:
                emit(Kind.CONSUME, target=a.id, amount=c)

    world.close_tick(t)
    world.tick = t + 1
    world.next_seq = 0
    return emit.out


def _can_give(a: AgentState) -> bool:
    pol = a.policy
    return not pol.defector and a.resource >= pol.give_amount + pol.safety_buffer


def _apply_intent(world: WorldState, emit: _Emitter, a: AgentState, intent: ActionIntent) -> None:
    cfg = world.config
    kind = intent.kind
    if cfg.giving_disabled and kind in (
        IntentKind.GIVE, IntentKind.GIVE_NEED, IntentKind.TOKEN_REDEEM_REQUEST
    ):
        return
    if kind is IntentKind.GIVE or kind is IntentKind.GIVE_NEED:
        partner = world.agents[intent.target]
        if cfg.simultaneous_exchange and kind is IntentKind.GIVE:
            # trade: both legs in the same tick or nothing
            if _can_give(partner):
                emit(Kind.GIVE, actor=a.id, target=partner.id, amount=intent.amount)
                emit(Kind.GIVE, actor=partner.id, target=a.id,
                     amount=partner.policy.give_amount)
            else:
                emit(Kind.REFUSE, actor=partner.id, target=a.id)
            return
        emit(Kind.GIVE, actor=a.id, target=partner.id, amount=intent.amount)
    elif kind is IntentKind.TOKEN_REDEEM_REQUEST:
        holder = world.agents[intent.target]
        if holder.policy.accepts_tokens and _can_give(holder):
            emit(Kind.GIVE, actor=holder.id, target=a.id, amount=holder.policy.give_amount)
            emit(Kind.TOKEN_PAY, actor=a.id, target=holder.id, token=intent.token)
        else:
            emit(Kind.REFUSE, actor=holder.id, target=a.id, token=intent.token)
    elif kind is IntentKind.INVEST:
        emit(Kind.INVEST, actor=a.id, amount=intent.amount, project=intent.project)
    elif intent.target is not None:
        emit(Kind.REFUSE, actor=a.id, target=intent.target)


def run(config: ScenarioConfig, seed: int, check: bool = False) -> EventLog:
    """Full run: init then ``horizon`` steps. Same inputs, same bytes."""
    return run_world(config, seed, check)[1]


def run_world(config: ScenarioConfig, seed: int, check: bool = False) -> tuple[WorldState, EventLog]:
    """Like :func:`run` but also hands back the final in-memory state."""
    log = EventLog(LogHeader(seed=check_seed(seed), digest=config_digest(config)))
    world = init_world(config, seed, log, check=check)
    for _ in range(config.horizon):
        step(world, log)
    return world, log
