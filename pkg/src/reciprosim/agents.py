"""Agent substrate: partner memory, reciprocity scoring, behavioural updating.

Policy functions are deterministic given their inputs and an rng stream.
Records and states are plain mutable dataclasses owned by the engine; the
operations mutate in place and return the state for chaining.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .errors import SelfInteraction
from .rng import SplitMix64

BLOCK_SCORE = Fraction(-1, 2)
BLOCK_MIN_COUNT = 4


class Outcome(enum.Enum):
    HELPED_ME = "HELPED_ME"
    REFUSED_ME = "REFUSED_ME"


class Branch(enum.Enum):
    NEED = "NEED"
    SCORED = "SCORED"
    STRANGER = "STRANGER"


class IntentKind(str, enum.Enum):
    GIVE = "GIVE"
    GIVE_NEED = "GIVE_NEED"
    TOKEN_REDEEM_REQUEST = "TOKEN_REDEEM_REQUEST"
    INVEST = "INVEST"
    WITHHOLD = "WITHHOLD"


@dataclass
class PartnerRecord:
    """What I remember about one partner ("Agent X: 5 helpful, 2 unhelpful")."""

    helpful: int = 0
    unhelpful: int = 0
    given: int = 0
    received: int = 0
    last_tick: int = 0
    blocked: bool = False

    @property
    def balance(self) -> int:
        return self.given - self.received

    @property
    def count(self) -> int:
        return self.helpful + self.unhelpful


@dataclass(frozen=True)
class PolicyParams:
    theta_coop: Fraction = Fraction(0)
    give_amount: int = 3
    p0: Fraction = Fraction(0)
    need_threshold: int = 10
    safety_buffer: int = 0
    need_gift: int = 3
    roi_threshold: Fraction = Fraction(2)
    accepts_tokens: bool = False
    insurance_norm: bool = False
    need_overrides_blocking: bool = True
    defector: bool = False

    def __post_init__(self) -> None:
        if self.give_amount < 1:
            raise ValueError("give_amount must be >= 1")
        if self.safety_buffer < 0:
            raise ValueError("safety_buffer must be >= 0")


@dataclass
class AgentState:
    id: int
    resource: int
    policy: PolicyParams = field(default_factory=PolicyParams)
    capacity: Optional[int] = None
    memory: dict[int, PartnerRecord] = field(default_factory=dict)
    tokens: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class ActionIntent:
    kind: IntentKind
    target: Optional[int] = None
    amount: Optional[int] = None
    project: Optional[int] = None
    token: Optional[int] = None


WITHHOLD = ActionIntent(IntentKind.WITHHOLD)


@dataclass(frozen=True)
class ProjectView:
    id: int
    multiplier: Fraction
    unit: int
    feasible: bool


class Candidates:
    """The other agents an agent can see, ascending by id.

    Backed by the live resource vector so the engine does not rebuild a list
    for every decision; ``from_pairs`` wraps an explicit list.
    """

    __slots__ = ("_resources", "_accepts", "_exclude", "_ids")

    def __init__(
        self,
        resources: Sequence[int],
        accepts_tokens: Sequence[bool],
        exclude: int,
        ids: Optional[Sequence[int]] = None,
    ) -> None:
        self._resources = resources
        self._accepts = accepts_tokens
        self._exclude = exclude
        self._ids = ids

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[int, int]], accepts_tokens: Iterable[int] = ()
    ) -> "Candidates":
        pairs = sorted(pairs)
        size = (pairs[-1][0] + 1) if pairs else 0
        res = [0] * size
        for i, r in pairs:
            res[i] = r
        acc = [False] * size
        for i in accepts_tokens:
            if i < size:
                acc[i] = True
        return cls(res, acc, exclude=-1, ids=[i for i, _ in pairs])

    def __iter__(self) -> Iterator[int]:
        if self._ids is not None:
            return iter(self._ids)
        ex = self._exclude
        return (i for i in range(len(self._resources)) if i != ex)

    def __contains__(self, i: int) -> bool:
        if self._ids is not None:
            return i in self._ids
        return 0 <= i < len(self._resources) and i != self._exclude

    def resource(self, i: int) -> int:
        return self._resources[i]

    def accepts_tokens(self, i: int) -> bool:
        return self._accepts[i]


@dataclass
class Observation:
    tick: int
    candidates: Candidates
    projects: list[ProjectView] = field(default_factory=list)


def _touch(state: AgentState, partner: int, tick: int) -> Optional[PartnerRecord]:
    """Fetch or create the record for ``partner``, evicting if memory is full."""
    if partner == state.id:
        raise SelfInteraction(f"agent {state.id} cannot interact with itself")
    rec = state.memory.get(partner)
    if rec is not None:
        return rec
    cap = state.capacity
    if cap is not None:
        if cap <= 0:
            return None
        if len(state.memory) >= cap:
            # least recently interacted, ties to the lowest partner id
            victim = min(state.memory, key=lambda p: (state.memory[p].last_tick, p))
            del state.memory[victim]
    rec = PartnerRecord(last_tick=tick)
    state.memory[partner] = rec
    return rec


def record_interaction(
    state: AgentState,
    partner: int,
    outcome: Outcome,
    amount: Optional[int],
    tick: int,
) -> AgentState:
    rec = _touch(state, partner, tick)
    if rec is None:
        return state
    if outcome is Outcome.HELPED_ME:
        rec.helpful += 1
        rec.received += amount or 0
    else:
        rec.unhelpful += 1
    rec.last_tick = tick
    return state


def record_gift(state: AgentState, partner: int, amount: int, tick: int) -> AgentState:
    """The giver's side of a GIVE: remembers what was sent."""
    rec = _touch(state, partner, tick)
    if rec is None:
        return state
    rec.given += amount
    rec.last_tick = tick
    return state


def reciprocity_score(rec: Optional[PartnerRecord]) -> Fraction:
    if rec is None:
        return Fraction(0)
    n = rec.helpful + rec.unhelpful
    if n == 0:
        return Fraction(0)
    return Fraction(rec.helpful - rec.unhelpful, n)


def _score_key(rec: Optional[PartnerRecord]) -> tuple[int, int]:
    # (numerator, positive denominator); avoids building Fractions in hot loops
    if rec is None:
        return 0, 1
    n = rec.helpful + rec.unhelpful
    if n == 0:
        return 0, 1
    return rec.helpful - rec.unhelpful, n


def _gt(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] * b[1] > b[0] * a[1]


def _ge_frac(a: tuple[int, int], f: Fraction) -> bool:
    return a[0] * f.denominator >= f.numerator * a[1]


def _as_candidates(candidates) -> Candidates:
    if isinstance(candidates, Candidates):
        return candidates
    return Candidates.from_pairs(candidates)


def select_partner(
    state: AgentState, candidates, rng: SplitMix64
) -> Optional[tuple[int, Branch]]:
    """Whom to engage this tick, and through which branch.

    Returns ``None`` when nobody qualifies. The stranger branch consumes one
    rng draw; no other branch touches the stream.
    """
    cands = _as_candidates(candidates)
    pol = state.policy
    mem = state.memory

    if pol.insurance_norm:
        nu = pol.need_threshold
        best = None
        best_r = 0
        for i in cands:
            r = cands.resource(i)
            if r < nu and (best is None or r < best_r):
                rec = mem.get(i)
                if rec is not None and rec.blocked and not pol.need_overrides_blocking:
                    continue
                best, best_r = i, r
        if best is not None:
            return best, Branch.NEED

    best = None
    best_key = (0, 1)
    for i in sorted(mem):
        rec = mem[i]
        if rec.blocked or i not in cands:
            continue
        k = _score_key(rec)
        if best is None or _gt(k, best_key):
            best, best_key = i, k
    if best is not None and _ge_frac(best_key, pol.theta_coop):
        return best, Branch.SCORED

    stranger = _lowest_stranger(state, cands)
    if stranger is not None:
        if rng.bernoulli(pol.p0):
            return stranger, Branch.STRANGER
    return None


def _lowest_stranger(state: AgentState, cands: Candidates) -> Optional[int]:
    mem = state.memory
    for i in cands:
        if i not in mem:
            return i
    return None


def token_target(state: AgentState, cands: Candidates) -> Optional[int]:
    """Highest-scoring token-accepting candidate, ties to the lowest id."""
    best = None
    best_key = (0, 1)
    # known partners first, then the lowest-id stranger (score 0) competes
    for i in sorted(state.memory):
        if i in cands and cands.accepts_tokens(i):
            k = _score_key(state.memory[i])
            if best is None or _gt(k, best_key) or (not _gt(best_key, k) and i < best):
                best, best_key = i, k
    for i in cands:
        if i not in state.memory and cands.accepts_tokens(i):
            if best is None or _gt((0, 1), best_key) or (not _gt(best_key, (0, 1)) and i < best):
                best, best_key = i, (0, 1)
            break
    return best


def decide_action(state: AgentState, obs: Observation, rng: SplitMix64) -> ActionIntent:
    pol = state.policy
    res = state.resource

    if pol.defector:
        # always withholds; aims the refusal at whoever it would have favoured
        pick = select_partner(state, obs.candidates, rng)
        return ActionIntent(IntentKind.WITHHOLD, target=pick[0] if pick else None)

    for proj in sorted(obs.projects, key=lambda p: p.id):
        if proj.feasible and proj.multiplier >= pol.roi_threshold and res >= proj.unit:
            return ActionIntent(IntentKind.INVEST, amount=proj.unit, project=proj.id)

    pick = select_partner(state, obs.candidates, rng)
    if pick is not None:
        target, branch = pick
        if branch is Branch.NEED:
            amt = min(pol.need_gift, res - pol.safety_buffer)
            if amt > 0:
                return ActionIntent(IntentKind.GIVE_NEED, target=target, amount=amt)
        elif res >= pol.give_amount + pol.safety_buffer:
            return ActionIntent(IntentKind.GIVE, target=target, amount=pol.give_amount)

    if state.tokens and res < pol.need_threshold:
        target = token_target(state, obs.candidates)
        if target is not None:
            return ActionIntent(
                IntentKind.TOKEN_REDEEM_REQUEST, target=target, token=min(state.tokens)
            )
    return WITHHOLD


def update_strategy(state: AgentState) -> AgentState:
    """Block partners with persistently negative returns; idempotent."""
    for rec in state.memory.values():
        n = rec.helpful + rec.unhelpful
        # score <= -1/2  <=>  2 * (h - u) <= -n
        rec.blocked = n >= BLOCK_MIN_COUNT and 2 * (rec.helpful - rec.unhelpful) <= -n
    return state
