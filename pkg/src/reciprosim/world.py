"""World state and the single event-application path.

The engine and :func:`replay` both mutate a :class:`WorldState` only through
:meth:`WorldState.apply` and the two tick-boundary hooks, which is what makes
a replayed log land on exactly the engine's state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .agents import AgentState, Outcome, record_gift, record_interaction, update_strategy
from .errors import (
    AmountOverflow,
    ConfigInvalid,
    ConservationViolation,
    DigestMismatch,
    OrderViolation,
    SchemaViolation,
)
from .events import MAX_AMOUNT, Event, EventLog, Kind, check_schema
from .rng import DECISION_SALT, SHOCK_SALT, SplitMix64
from .scenarios import ScenarioConfig, config_digest, validate_config


@dataclass
class Project:
    id: int
    open_tick: int
    deadline: int
    maturity: int
    threshold: int
    multiplier: Fraction
    refund: Fraction
    unit: int
    contributions: dict[int, int] = field(default_factory=dict)
    funded: Optional[bool] = None

    @property
    def pooled(self) -> int:
        return sum(self.contributions.values())


@dataclass
class WorldState:
    config: ScenarioConfig
    agents: list[AgentState]
    tick: int = 0
    next_seq: int = 0
    open_projects: dict[int, Project] = field(default_factory=dict)
    circulating_tokens: dict[int, int] = field(default_factory=dict)
    next_project_id: int = 0
    decision_rng: Optional[SplitMix64] = None
    shock_rng: Optional[SplitMix64] = None
    # conservation bookkeeping
    expected_total: int = 0
    minted: int = 0
    check: bool = True
    _last_key: tuple[int, int] = (-1, -1)

    @property
    def resources(self) -> list[int]:
        return [a.resource for a in self.agents]

    @property
    def escrow(self) -> int:
        return sum(p.pooled for p in self.open_projects.values())

    # -- event application ---------------------------------------------
    def apply(self, e: Event) -> None:
        key = (e.tick, e.seq)
        if key <= self._last_key:
            raise OrderViolation(f"event {key} does not follow {self._last_key}")
        self._last_key = key
        k = e.kind
        if k is Kind.INCOME:
            a = self._agent(e.target)
            a.resource += e.amount
            self.expected_total += e.amount
        elif k is Kind.CONSUME or k is Kind.SHOCK:
            a = self._agent(e.target)
            self._debit(a, e.amount, e)
            self.expected_total -= e.amount
        elif k is Kind.GIVE:
            giver, taker = self._agent(e.actor), self._agent(e.target)
            self._debit(giver, e.amount, e)
            taker.resource += e.amount
            record_interaction(taker, giver.id, Outcome.HELPED_ME, e.amount, e.tick)
            record_gift(giver, taker.id, e.amount, e.tick)
        elif k is Kind.REFUSE:
            refuser, refused = self._agent(e.actor), self._agent(e.target)
            record_interaction(refused, refuser.id, Outcome.REFUSED_ME, None, e.tick)
        elif k is Kind.MINT:
            if e.token in self.circulating_tokens:
                raise ConservationViolation(f"token {e.token} minted twice")
            holder = self._agent(e.target)
            self.circulating_tokens[e.token] = holder.id
            holder.tokens.add(e.token)
            self.minted += 1
        elif k is Kind.TOKEN_PAY:
            payer, payee = self._agent(e.actor), self._agent(e.target)
            if self.circulating_tokens.get(e.token) != payer.id:
                raise ConservationViolation(
                    f"token {e.token} paid by {payer.id} who does not hold it"
                )
            payer.tokens.discard(e.token)
            payee.tokens.add(e.token)
            self.circulating_tokens[e.token] = payee.id
        elif k is Kind.TOKEN_REDEEM:
            # reserved request signal; the engine records redemptions as GIVE + TOKEN_PAY
            self._agent(e.actor), self._agent(e.target)
        elif k is Kind.INVEST:
            a = self._agent(e.actor)
            proj = self.open_projects.get(e.project)
            if proj is None or e.tick >= proj.deadline or e.tick < proj.open_tick:
                raise ConservationViolation(f"INVEST into closed project {e.project}")
            self._debit(a, e.amount, e)
            proj.contributions[a.id] = proj.contributions.get(a.id, 0) + e.amount
            # escrow is subtracted from the resource side, so the total drops too
            self.expected_total -= e.amount
        elif k is Kind.PROJECT_PAYOUT or k is Kind.PROJECT_FAIL:
            a = self._agent(e.target)
            proj = self.open_projects.get(e.project)
            if proj is None or a.id not in proj.contributions:
                raise ConservationViolation(
                    f"{k.value} to non-contributor {a.id} of project {e.project}"
                )
            if k is Kind.PROJECT_PAYOUT and (not proj.funded or e.tick != proj.maturity):
                raise ConservationViolation(f"payout of unfunded/immature project {proj.id}")
            if k is Kind.PROJECT_FAIL and (proj.funded is not None or e.tick != proj.deadline):
                raise ConservationViolation(f"refund of project {proj.id} outside deadline")
            del proj.contributions[a.id]
            a.resource += e.amount
            if a.resource > MAX_AMOUNT:
                raise AmountOverflow(f"agent {a.id} resource overflow")
            self.expected_total += e.amount
        else:  # pragma: no cover - Kind is closed
            raise SchemaViolation(f"unhandled kind {k}")
        if self.check:
            self.check_conservation(e)

    def _agent(self, i: Optional[int]) -> AgentState:
        if i is None or not 0 <= i < len(self.agents):
            raise SchemaViolation(f"unknown agent {i!r}")
        return self.agents[i]

    @staticmethod
    def _debit(a: AgentState, amount: int, e: Event) -> None:
        if amount > a.resource:
            raise ConservationViolation(
                f"{e.kind.value} at ({e.tick},{e.seq}) drives agent {a.id} negative"
            )
        a.resource -= amount

    def check_conservation(self, e: Optional[Event] = None) -> None:
        """Verify the resource identity, and the token identities when ``e`` moved a token.

        Token holdings only change on MINT and TOKEN_PAY, so the token
        bookkeeping is re-verified after those (or when called without an event).
        """
        where = f" after ({e.tick},{e.seq})" if e is not None else ""
        res = [a.resource for a in self.agents]
        if res and min(res) < 0:
            raise ConservationViolation(f"negative resource{where}")
        # expected_total already nets out escrowed contributions
        total = sum(res)
        if total != self.expected_total:
            raise ConservationViolation(
                f"resource total {total} != accounted {self.expected_total}{where}"
            )
        if e is not None and e.kind is not Kind.MINT and e.kind is not Kind.TOKEN_PAY:
            return
        if len(self.circulating_tokens) != self.minted:
            raise ConservationViolation(f"token count mismatch{where}")
        for a in self.agents:
            for t in a.tokens:
                if self.circulating_tokens.get(t) != a.id:
                    raise ConservationViolation(f"token {t} holder disagreement{where}")
        if sum(len(a.tokens) for a in self.agents) != self.minted:
            raise ConservationViolation(f"token held twice or lost{where}")

    # -- tick boundaries --------------------------------------------------
    def post_projects(self, tick: int) -> None:
        cfg = self.config
        if cfg.projects_posted_at(tick):
            pid = self.next_project_id
            self.next_project_id += 1
            self.open_projects[pid] = Project(
                id=pid,
                open_tick=tick,
                deadline=tick + cfg.project_deadline,
                maturity=tick + cfg.project_maturity,
                threshold=cfg.project_threshold,
                multiplier=cfg.project_multiplier,
                refund=cfg.project_refund,
                unit=cfg.project_unit,
            )

    def close_tick(self, tick: int) -> None:
        """End-of-tick bookkeeping that leaves no events: funding flags, pruning, blocking."""
        for pid in sorted(self.open_projects):
            proj = self.open_projects[pid]
            if proj.deadline == tick and proj.funded is None:
                if proj.contributions and proj.pooled >= proj.threshold:
                    proj.funded = True
                elif proj.contributions:
                    raise ConservationViolation(f"project {pid} failed but escrow not refunded")
                else:
                    del self.open_projects[pid]
            elif proj.funded and proj.maturity == tick:
                if proj.contributions:
                    raise ConservationViolation(f"project {pid} matured but not paid out")
                del self.open_projects[pid]
        for a in self.agents:
            update_strategy(a)

    def snapshot(self) -> dict:
        """Comparable view of everything replay must reproduce (rng excluded)."""
        return {
            "tick": self.tick,
            "resources": self.resources,
            "tokens": dict(sorted(self.circulating_tokens.items())),
            "projects": {
                pid: (p.open_tick, p.deadline, p.maturity, p.funded,
                      dict(sorted(p.contributions.items())))
                for pid, p in sorted(self.open_projects.items())
            },
            "memories": [
                {pid: (r.helpful, r.unhelpful, r.given, r.received, r.last_tick, r.blocked)
                 for pid, r in sorted(a.memory.items())}
                for a in self.agents
            ],
            "holdings": [sorted(a.tokens) for a in self.agents],
        }


def new_world(config: ScenarioConfig, seed: int = 0, check: bool = True) -> WorldState:
    """Agents at their endowments, nothing minted, tick 0."""
    problems = validate_config(config)
    # horizon 0 is a legal (empty) run even though configs from files need >= 1
    problems = [p for p in problems if not p.startswith("horizon")]
    if config.horizon < 0:
        problems.append("horizon: must be >= 0")
    if problems:
        raise ConfigInvalid("; ".join(problems))
    defectors = set(config.defectors())
    mem = config.effective_memory
    agents = [
        AgentState(
            id=i,
            resource=config.endowment,
            policy=config.policy(defector=i in defectors),
            capacity=mem,
        )
        for i in range(config.n_agents)
    ]
    return WorldState(
        config=config,
        agents=agents,
        decision_rng=SplitMix64.substream(seed, DECISION_SALT),
        shock_rng=SplitMix64.substream(seed, SHOCK_SALT),
        expected_total=config.endowment * config.n_agents,
        check=check,
    )


def replay(log: EventLog, config: ScenarioConfig, check: bool = True) -> WorldState:
    """Rebuild the end-of-run world from ``log``.

    Conservation identities are verified after every event when ``check``.
    The returned state matches the engine's final state; the rng streams
    are not reconstructed.
    """
    if log.header.digest != config_digest(config):
        raise DigestMismatch(
            f"log digest {log.header.digest:016x} != config digest {config_digest(config):016x}"
        )
    world = new_world(config, log.header.seed, check=check)
    world.decision_rng = world.shock_rng = None
    tick = 0
    if config.horizon > 0:
        world.post_projects(0)
    for e in log.events:
        check_schema(e)
        if e.tick >= max(config.horizon, 1):
            raise OrderViolation(f"event at tick {e.tick} beyond horizon {config.horizon}")
        while tick < e.tick:
            world.close_tick(tick)
            tick += 1
            world.post_projects(tick)
        world.apply(e)
    while tick < config.horizon:
        world.close_tick(tick)
        tick += 1
        if tick < config.horizon:
            world.post_projects(tick)
    world.tick = config.horizon
    return world
