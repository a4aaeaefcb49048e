"""Experiment config files.

The grammar is line based::

    # comment
    [scenario]
    kind = CREDIT
    N = 20            # aliases N, P and M name n_agents, period, memory_capacity
    [detector]
    delta = 5
    [experiment]
    seeds = 1..20
    controls = memory_disabled

Section headers are optional; a key outside any section is filed under the
section that owns it. Inside a section, a key that belongs elsewhere is an
error. Parse errors stop at the first bad line; validation collects every
problem before raising.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .detectors import DetectorParams
from .errors import ConfigError, ConfigParseError, ValidationError
from .events import MAX_U64
from .scenarios import (
    ALIASES,
    ALLOWED_OVERRIDES,
    CONTROL_SWITCHES,
    FIELD_TYPES,
    KINDS,
    ScenarioConfig,
    canonical_text,
    coerce_field,
    make_scenario,
    validate_config,
)

SECTIONS = ("scenario", "detector", "experiment")
DETECTOR_KEYS = ("delta", "epsilon", "window", "d_min", "nu")
EXPERIMENT_KEYS = ("seeds", "controls", "out")

_KEY_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def section_of(key: str) -> Optional[str]:
    if key in FIELD_TYPES or key in ALIASES:
        return "scenario"
    if key in DETECTOR_KEYS:
        return "detector"
    if key in EXPERIMENT_KEYS:
        return "experiment"
    return None


@dataclass(frozen=True)
class Entry:
    section: Optional[str]
    key: str
    value: str
    line: int


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig
    overrides: dict[str, Any]
    seeds: list[int]
    controls: list[str] = field(default_factory=list)
    params: DetectorParams = field(default_factory=DetectorParams)
    out: Optional[str] = None

    def control_config(self, switch: str) -> ScenarioConfig:
        return self.scenario.with_switch(switch)


def parse_entries(text: str) -> list[Entry]:
    """Tokenize config text; raises ConfigParseError with line and column."""
    entries: list[Entry] = []
    section: Optional[str] = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        col = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigParseError(n, col + len(stripped), "expected ']' to close section")
            name = stripped[1:-1].strip().lower()
            if name not in SECTIONS:
                raise ConfigParseError(n, col + 1, f"unknown section [{name}]")
            section = name
            continue
        if "=" not in line:
            raise ConfigParseError(n, col, "expected 'key = value'")
        key_part, value_part = line.split("=", 1)
        key = key_part.strip()
        if not _KEY_RE.fullmatch(key):
            raise ConfigParseError(n, col, f"malformed key {key!r}")
        value = value_part.strip()
        if not value:
            raise ConfigParseError(n, len(key_part) + 2, f"missing value for {key!r}")
        entries.append(Entry(section, key, value, n))
    return entries


def parse_seeds(text: str) -> list[int]:
    """``7``, ``1..20`` (inclusive) or a comma list mixing both."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo_s, hi_s = part.split("..", 1)
            lo, hi = _seed(lo_s), _seed(hi_s)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(_seed(part))
    if len(set(seeds)) != len(seeds):
        raise ValueError("seed list repeats a seed")
    return seeds


def _seed(text: str) -> int:
    text = text.strip()
    if not text.isascii() or not text.isdigit():
        raise ValueError(f"not a seed: {text!r}")
    v = int(text)
    if v > MAX_U64:
        raise ValueError(f"seed {v} exceeds 64 bits")
    return v


def _group(entries: list[Entry], problems: list[str]) -> dict[str, dict[str, Entry]]:
    grouped: dict[str, dict[str, Entry]] = {s: {} for s in SECTIONS}
    for e in entries:
        home = section_of(e.key)
        where = f"line {e.line}"
        if home is None:
            problems.append(f"{where}: unknown key {e.key!r}")
            continue
        if e.section is not None and e.section != home:
            problems.append(f"{where}: {e.key!r} belongs in [{home}], not [{e.section}]")
            continue
        canonical = ALIASES.get(e.key, e.key)
        if canonical in grouped[home]:
            problems.append(f"{where}: duplicate key {e.key!r}")
            continue
        grouped[home][canonical] = e
    return grouped


def _scenario(items: dict[str, Entry], problems: list[str]) -> Optional[tuple[ScenarioConfig, dict]]:
    kind_entry = items.get("kind")
    if kind_entry is None:
        problems.append("kind: missing (one of " + ", ".join(KINDS) + ")")
        return None
    kind = kind_entry.value.upper()
    if kind not in KINDS:
        problems.append(f"line {kind_entry.line}: unknown kind {kind_entry.value!r}")
        return None
    overrides: dict[str, Any] = {}
    for name, e in items.items():
        if name == "kind":
            continue
        if name not in ALLOWED_OVERRIDES[kind]:
            problems.append(f"line {e.line}: {e.key!r} is not a {kind} setting")
            continue
        try:
            overrides[name] = coerce_field(name, e.value)
        except (ValueError, ZeroDivisionError) as exc:
            problems.append(f"line {e.line}: {exc}")
    cfg = make_scenario(kind, overrides)
    problems.extend(validate_config(cfg))
    return cfg, overrides


def _params(items: dict[str, Entry], problems: list[str]) -> DetectorParams:
    values: dict[str, Optional[int]] = {}
    for name, e in items.items():
        if name == "nu" and e.value.lower() in ("none", "auto"):
            values[name] = None
            continue
        if not e.value.isascii() or not e.value.isdigit():
            problems.append(f"line {e.line}: {name}: not a non-negative integer: {e.value!r}")
            continue
        values[name] = int(e.value)
    params = dataclasses.replace(DetectorParams(), **values)
    if not params.delta > params.epsilon >= 0:
        problems.append("delta: must exceed epsilon (and epsilon >= 0)")
    if not params.window > params.d_min >= 1:
        problems.append("window: must exceed d_min, and d_min must be at least 1")
    return params


def build_spec(text: str) -> ExperimentSpec:
    """Parse and validate config text into an :class:`ExperimentSpec`."""
    problems: list[str] = []
    grouped = _group(parse_entries(text), problems)
    built = _scenario(grouped["scenario"], problems)
    params = _params(grouped["detector"], problems)

    exp = grouped["experiment"]
    seeds: list[int] = []
    if "seeds" not in exp:
        problems.append("seeds: missing")
    else:
        try:
            seeds = parse_seeds(exp["seeds"].value)
        except ValueError as exc:
            problems.append(f"line {exp['seeds'].line}: seeds: {exc}")
    controls: list[str] = []
    if "controls" in exp:
        e = exp["controls"]
        for name in (c.strip() for c in e.value.split(",")):
            if name.lower() == "none":
                continue
            if name not in CONTROL_SWITCHES:
                problems.append(f"line {e.line}: unknown control {name!r}")
            elif name in controls:
                problems.append(f"line {e.line}: control {name!r} listed twice")
            else:
                controls.append(name)
    if built is not None:
        cfg = built[0]
        for c in controls:
            if getattr(cfg, c):
                problems.append(f"controls: {c} is already on in the treatment")
    if problems:
        raise ValidationError(problems)
    assert built is not None
    return ExperimentSpec(
        scenario=built[0],
        overrides=built[1],
        seeds=seeds,
        controls=controls,
        params=params,
        out=exp["out"].value if "out" in exp else None,
    )


def load_config(path: str | Path) -> ExperimentSpec:
    return build_spec(_read(path))


def load_params(path: str | Path) -> tuple[DetectorParams, Optional[ScenarioConfig]]:
    """Detector parameters, plus the scenario when the file has one.

    Used by ``analyze``: seeds and controls are not required here.
    """
    problems: list[str] = []
    grouped = _group(parse_entries(_read(path)), problems)
    params = _params(grouped["detector"], problems)
    cfg = None
    if grouped["scenario"]:
        built = _scenario(grouped["scenario"], problems)
        cfg = built[0] if built else None
    if problems:
        raise ValidationError(problems)
    return params, cfg


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise ConfigError(f"{path} is not UTF-8 text") from None


# -- full-config sidecars ---------------------------------------------------------
#
# A run writes its complete configuration next to its log so the log can be
# analysed later without the original experiment file. Every field is
# present, so these bypass the per-kind override rules.


def sidecar_text(cfg: ScenarioConfig) -> str:
    return "[scenario]\n" + canonical_text(cfg)


def parse_sidecar(text: str) -> ScenarioConfig:
    problems: list[str] = []
    values: dict[str, Any] = {}
    for e in parse_entries(text):
        if e.section not in (None, "scenario") or e.key not in FIELD_TYPES:
            problems.append(f"line {e.line}: unexpected key {e.key!r}")
            continue
        try:
            values[e.key] = coerce_field(e.key, e.value)
        except (ValueError, ZeroDivisionError) as exc:
            problems.append(f"line {e.line}: {exc}")
    missing = sorted(set(FIELD_TYPES) - set(values))
    if missing:
        problems.append("missing fields: " + ", ".join(missing))
    if problems:
        raise ValidationError(problems)
    cfg = ScenarioConfig(**values)
    problems = validate_config(cfg)
    if problems:
        raise ValidationError(problems)
    return cfg


def load_sidecar(path: str | Path) -> ScenarioConfig:
    return parse_sidecar(_read(path))

