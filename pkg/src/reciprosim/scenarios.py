"""Scenario configurations for the five structural conditions.

Each kind switches on exactly one structural condition on top of the shared
agent substrate:

=========== ============================================================
TRADE       simultaneous symmetric exchange, nothing else
CREDIT      time delay: two classes with anti-phase income
INSURANCE   risk: iid shocks, need-based giving norm
TOKEN       indirection: large population, tiny memory, tokens, p0 = 0
INVESTMENT  future reward: periodic pooled projects
=========== ============================================================
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Optional

from .agents import PolicyParams
from .errors import OverrideRejected, UnknownKind
from .events import MAX_AMOUNT, MAX_U64, fnv1a64

KINDS = ("TRADE", "CREDIT", "INSURANCE", "TOKEN", "INVESTMENT")

# Switches a paired control may flip; each maps to one boolean field.
CONTROL_SWITCHES = ("giving_disabled", "tokens_disabled", "memory_disabled")


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "TRADE"
    n_agents: int = 20
    horizon: int = 2000
    endowment: int = 50
    income: int = 2
    consumption: int = 1
    period: int = 10
    p_shock: Fraction = Fraction(0)
    shock_loss: int = 10
    tokens_per_agent: int = 0
    memory_capacity: Optional[int] = None
    project_period: int = 0
    project_unit: int = 5
    project_threshold: int = 25
    project_deadline: int = 5
    project_maturity: int = 15
    project_multiplier: Fraction = Fraction(3)
    project_refund: Fraction = Fraction(1, 2)
    theta_coop: Fraction = Fraction(1, 2)
    give_amount: int = 3
    p0: Fraction = Fraction(1, 2)
    need_threshold: int = 10
    safety_buffer: int = 0
    need_gift: int = 3
    roi_threshold: Fraction = Fraction(2)
    accepts_tokens: bool = False
    insurance_norm: bool = False
    need_overrides_blocking: bool = True
    defector_fraction: Fraction = Fraction(0)
    simultaneous_exchange: bool = False
    giving_disabled: bool = False
    tokens_disabled: bool = False
    memory_disabled: bool = False

    # -- derived views -------------------------------------------------
    def policy(self, defector: bool = False) -> PolicyParams:
        return PolicyParams(
            theta_coop=self.theta_coop,
            give_amount=self.give_amount,
            p0=self.p0,
            need_threshold=self.need_threshold,
            safety_buffer=self.safety_buffer,
            need_gift=self.need_gift,
            roi_threshold=self.roi_threshold,
            accepts_tokens=self.accepts_tokens,
            insurance_norm=self.insurance_norm,
            need_overrides_blocking=self.need_overrides_blocking,
            defector=defector,
        )

    @property
    def effective_memory(self) -> Optional[int]:
        return 0 if self.memory_disabled else self.memory_capacity

    @property
    def effective_tokens_per_agent(self) -> int:
        return 0 if self.tokens_disabled else self.tokens_per_agent

    @property
    def n_defectors(self) -> int:
        return int(self.defector_fraction * self.n_agents)

    def defectors(self) -> list[int]:
        """Defectors are the highest ids, so they straddle both income classes."""
        return list(range(self.n_agents - self.n_defectors, self.n_agents))

    def income_class(self, agent: int) -> str:
        return "A" if agent % 2 == 0 else "B"

    def income_for(self, agent: int, tick: int) -> int:
        if self.kind == "CREDIT":
            phase = (tick // self.period) % 2
            if (phase == 0) == (agent % 2 == 0):
                return 2 * self.income
            return 0
        return self.income

    def projects_posted_at(self, tick: int) -> bool:
        return self.project_period > 0 and tick % self.project_period == 0

    def posted_project_ticks(self) -> list[int]:
        if self.project_period <= 0:
            return []
        return list(range(0, self.horizon, self.project_period))

    # structural introspection, used to check scenario isolation
    @property
    def has_delay(self) -> bool:
        return self.kind == "CREDIT"

    @property
    def has_risk(self) -> bool:
        return self.p_shock > 0 and self.shock_loss > 0

    @property
    def has_tokens(self) -> bool:
        return self.effective_tokens_per_agent > 0

    @property
    def has_projects(self) -> bool:
        return self.project_period > 0

    def with_switch(self, switch: str) -> "ScenarioConfig":
        if switch not in CONTROL_SWITCHES:
            raise OverrideRejected(f"unknown control switch {switch!r}")
        return dataclasses.replace(self, **{switch: True})


FIELD_TYPES: dict[str, str] = {}
for _f in dataclasses.fields(ScenarioConfig):
    if _f.name == "kind":
        FIELD_TYPES[_f.name] = "kind"
    elif _f.name == "memory_capacity":
        FIELD_TYPES[_f.name] = "mem"
    elif _f.type in ("Fraction",):
        FIELD_TYPES[_f.name] = "frac"
    elif _f.type == "bool":
        FIELD_TYPES[_f.name] = "bool"
    else:
        FIELD_TYPES[_f.name] = "int"

ALIASES = {"N": "n_agents", "P": "period", "M": "memory_capacity"}

_POLICY_FIELDS = {
    "theta_coop", "give_amount", "p0", "need_threshold", "safety_buffer",
    "need_gift", "roi_threshold", "accepts_tokens", "insurance_norm",
    "need_overrides_blocking",
}
_COMMON = _POLICY_FIELDS | {
    "n_agents", "horizon", "endowment", "income", "consumption",
    "memory_capacity", "defector_fraction", "giving_disabled", "memory_disabled",
}
_PROJECT_FIELDS = {
    "project_period", "project_unit", "project_threshold", "project_deadline",
    "project_maturity", "project_multiplier", "project_refund",
}
ALLOWED_OVERRIDES: dict[str, frozenset[str]] = {
    "TRADE": frozenset(_COMMON),
    "CREDIT": frozenset(_COMMON | {"period"}),
    "INSURANCE": frozenset(_COMMON | {"p_shock", "shock_loss"}),
    "TOKEN": frozenset(_COMMON | {"tokens_per_agent", "tokens_disabled"}),
    "INVESTMENT": frozenset(_COMMON | _PROJECT_FIELDS),
}

_DEFAULTS: dict[str, dict[str, Any]] = {
    "TRADE": dict(simultaneous_exchange=True),
    "CREDIT": dict(consumption=2, safety_buffer=45, p0=Fraction(1, 10)),
    "INSURANCE": dict(
        endowment=20,
        # shocks cancel the income surplus on average, so need keeps recurring
        p_shock=Fraction(1, 10),
        p0=Fraction(0),
        insurance_norm=True,
        need_gift=3,
        safety_buffer=10,
        # pure need norm: with memory, routine gifts pile onto the lowest-id
        # best-scored partner and that sink swamps the buffering
        memory_capacity=0,
    ),
    "TOKEN": dict(
        n_agents=60,
        # token traffic settles within the first few dozen ticks
        horizon=200,
        memory_capacity=3,
        endowment=8,
        income=1,
        consumption=1,
        tokens_per_agent=1,
        p0=Fraction(0),
        accepts_tokens=True,
    ),
    "INVESTMENT": dict(project_period=20),
}


def make_scenario(kind: str, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
    """Defaults for ``kind`` with ``overrides`` applied.

    Only the fields that belong to the kind may be overridden; values are
    coerced to their field type but range checks are left to
    :func:`validate_config`.
    """
    kind = str(kind).upper()
    if kind not in KINDS:
        raise UnknownKind(f"unknown scenario kind {kind!r}")
    values: dict[str, Any] = {"kind": kind, **_DEFAULTS[kind]}
    allowed = ALLOWED_OVERRIDES[kind]
    for key, value in (overrides or {}).items():
        name = ALIASES.get(key, key)
        if name not in allowed:
            raise OverrideRejected(f"{key!r} is not a {kind} field")
        values[name] = coerce_field(name, value)
    return ScenarioConfig(**values)


def coerce_field(name: str, value: Any) -> Any:
    tag = FIELD_TYPES[name]
    if tag == "frac":
        if isinstance(value, float):
            # floats go through their shortest repr so 0.05 means 1/20
            return Fraction(repr(value))
        return Fraction(value)
    if tag == "bool":
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("true", "on", "yes", "1"):
                return True
            if low in ("false", "off", "no", "0"):
                return False
        raise ValueError(f"{name}: not a boolean: {value!r}")
    if tag == "mem":
        if value is None or (isinstance(value, str) and value.strip().lower() in ("inf", "none")):
            return None
        return _as_int(name, value)
    if tag == "kind":
        return str(value).upper()
    return _as_int(name, value)


def _as_int(name: str, value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError(f"{name}: not an integer: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        text = value.strip()
        if text.lstrip("-").isdigit() and text.isascii():
            return int(text)
    raise ValueError(f"{name}: not an integer: {value!r}")


def validate_config(cfg: ScenarioConfig) -> list[str]:
    """Every violated constraint, as readable strings (empty when valid)."""
    problems: list[str] = []

    def need(cond: bool, msg: str) -> None:
        if not cond:
            problems.append(msg)

    need(cfg.kind in KINDS, f"kind: unknown {cfg.kind!r}")
    need(cfg.n_agents >= 2, "n_agents: must be at least 2")
    need(cfg.horizon >= 1, "horizon: must be at least 1")
    for name in ("endowment", "income", "consumption", "shock_loss", "tokens_per_agent",
                 "safety_buffer", "need_threshold", "project_unit", "project_threshold"):
        v = getattr(cfg, name)
        need(0 <= v <= MAX_AMOUNT, f"{name}: must be in [0, {MAX_AMOUNT}]")
    for name in ("p_shock", "p0", "defector_fraction", "project_refund"):
        v = getattr(cfg, name)
        need(0 <= v <= 1, f"{name}: probability/fraction must be in [0, 1]")
    need(-1 <= cfg.theta_coop <= 1, "theta_coop: must be in [-1, 1]")
    need(cfg.roi_threshold >= 0, "roi_threshold: must be >= 0")
    need(cfg.give_amount >= 1, "give_amount: must be >= 1")
    need(cfg.need_gift >= 1, "need_gift: must be >= 1")
    need(cfg.period >= 1, "period: must be >= 1")
    need(cfg.memory_capacity is None or cfg.memory_capacity >= 0,
         "memory_capacity: must be >= 0 or inf")
    need(cfg.project_period >= 0, "project_period: must be >= 0")
    need(cfg.project_deadline >= 1, "project_deadline: must be >= 1")
    need(cfg.project_deadline < cfg.project_maturity,
         "project_deadline: must be before project_maturity")
    need(cfg.project_multiplier > 0, "project_multiplier: must be positive")
    # solvency at desk scale: CREDIT classes earn 2y half the time, y on average
    need(cfg.consumption <= cfg.income, "consumption: must not exceed average income")
    return problems


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "inf"
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return str(value)


def canonical_text(cfg: ScenarioConfig) -> str:
    """Sorted ``key = value`` lines; the input to the log digest."""
    items = sorted((f.name, _render(getattr(cfg, f.name))) for f in dataclasses.fields(cfg))
    return "".join(f"{k} = {v}\n" for k, v in items)


def config_digest(cfg: ScenarioConfig) -> int:
    return fnv1a64(canonical_text(cfg).encode("utf-8"))


def check_seed(seed: int) -> int:
    if not isinstance(seed, int) or not 0 <= seed <= MAX_U64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    return seed
