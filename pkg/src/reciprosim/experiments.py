"""Seed sweeps with paired controls, and their on-disk artifacts.

Layout under the output directory::

    seed-<s>/treatment.log   .cfg   .csv
    seed-<s>/<control>.log   .cfg   .csv     (one triple per control switch)
    aggregate.csv            one row per (metric, seed), a column per run
    comparisons.csv          sign-test counts per (metric, control)
    MANIFEST                 every artifact with its size, then a status line

Nothing written depends on wall-clock time or worker scheduling, so a rerun
reproduces every byte.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from statistics import median
from typing import Optional, Sequence

from .config import ExperimentSpec, sidecar_text
from .detectors import DetectorParams
from .engine import run
from .errors import LengthMismatch, ReciprosimError
from .events import EventLog
from .reports import MacrostateReport, Value, render_decimal, render_exact, summarize
from .scenarios import ScenarioConfig

TREATMENT = "treatment"


@dataclass
class PairedComparison:
    metric: str
    treatment: list[Value]
    control: list[Value]
    wins: int
    losses: int
    ties: int
    median_diff: Optional[Fraction]
    undefined: int = 0


def compare(metric: str, treatment: Sequence[Value], control: Sequence[Value]) -> PairedComparison:
    """Seed-aligned sign counts. Pairs with an undefined side are counted apart."""
    if len(treatment) != len(control):
        raise LengthMismatch(
            f"{metric}: {len(treatment)} treatment values vs {len(control)} control values"
        )
    wins = losses = ties = undefined = 0
    diffs: list[Fraction] = []
    for t, c in zip(treatment, control):
        if t is None or c is None:
            undefined += 1
            continue
        d = Fraction(t) - Fraction(c)
        diffs.append(d)
        if d > 0:
            wins += 1
        elif d < 0:
            losses += 1
        else:
            ties += 1
    return PairedComparison(
        metric=metric,
        treatment=list(treatment),
        control=list(control),
        wins=wins,
        losses=losses,
        ties=ties,
        median_diff=Fraction(median(diffs)) if diffs else None,
        undefined=undefined,
    )


@dataclass
class SeedResult:
    seed: int
    logs: dict[str, EventLog]
    reports: dict[str, MacrostateReport]


def run_seed(
    config: ScenarioConfig, controls: Sequence[str], params: DetectorParams, seed: int
) -> SeedResult:
    logs = {TREATMENT: run(config, seed)}
    for c in controls:
        logs[c] = run(config.with_switch(c), seed)
    # the giving-disabled twin is the counterfactual for buffering
    twin = logs.get("giving_disabled")
    reports = {TREATMENT: summarize(logs[TREATMENT], twin, params, config)}
    for c in controls:
        reports[c] = summarize(logs[c], None, params, config.with_switch(c))
    return SeedResult(seed, logs, reports)


def _run_seed_args(args: tuple) -> SeedResult:
    return run_seed(*args)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    results: list[SeedResult]
    comparisons: dict[str, list[PairedComparison]]  # by control
    files: list[Path]


def run_experiment(
    spec: ExperimentSpec, out: str | Path, jobs: int = 1, keep_logs: bool = False
) -> ExperimentResult:
    """Run every seed (in parallel when ``jobs > 1``) and write the artifacts.

    On failure a MANIFEST listing what was written is left behind with a
    FAILED status and the error is re-raised.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    runs = [TREATMENT, *spec.controls]
    configs = {TREATMENT: spec.scenario}
    configs.update({c: spec.scenario.with_switch(c) for c in spec.controls})
    results: list[SeedResult] = []
    try:
        tasks = [(spec.scenario, spec.controls, spec.params, s) for s in spec.seeds]
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                stream = pool.map(_run_seed_args, tasks)
                for res in stream:
                    files += _write_seed(out, res, configs)
                    results.append(_slim(res, keep_logs))
        else:
            for t in tasks:
                res = _run_seed_args(t)
                files += _write_seed(out, res, configs)
                results.append(_slim(res, keep_logs))

        comparisons = {
            c: _comparisons(results, c) for c in spec.controls
        }
        files.append(_write(out / "aggregate.csv", _aggregate_csv(results, runs)))
        files.append(_write(out / "comparisons.csv", _comparisons_csv(comparisons)))
    except (ReciprosimError, OSError) as exc:
        _write_manifest(out, files, f"FAILED {type(exc).__name__}: {exc}")
        raise
    _write_manifest(out, files, "OK")
    return ExperimentResult(spec, results, comparisons, files)


def _slim(res: SeedResult, keep_logs: bool) -> SeedResult:
    # full logs are large; callers rarely need them after they hit the disk
    return res if keep_logs else SeedResult(res.seed, {}, res.reports)


def _write(path: Path, text: str) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _write_seed(out: Path, res: SeedResult, configs: dict[str, ScenarioConfig]) -> list[Path]:
    d = out / f"seed-{res.seed}"
    d.mkdir(exist_ok=True)
    written = []
    for name, log in res.logs.items():
        log_path = d / f"{name}.log"
        log.write(log_path)
        written.append(log_path)
        written.append(_write(d / f"{name}.cfg", sidecar_text(configs[name])))
        written.append(_write(d / f"{name}.csv", res.reports[name].to_csv()))
    return written


def _aggregate_csv(results: list[SeedResult], runs: list[str]) -> str:
    names = [m for m, _ in results[0].reports[TREATMENT].metrics()] if results else []
    rows = ["metric,seed," + ",".join(runs)]
    by_seed = sorted(results, key=lambda r: r.seed)
    for m in sorted(names):
        for r in by_seed:
            vals = [render_exact(r.reports[run].metric(m)) for run in runs]
            rows.append(f"{m},{r.seed}," + ",".join(vals))
    return "\n".join(rows) + "\n"


def _comparisons(results: list[SeedResult], control: str) -> list[PairedComparison]:
    by_seed = sorted(results, key=lambda r: r.seed)
    if not by_seed:
        return []
    names = [m for m, _ in by_seed[0].reports[TREATMENT].metrics()]
    return [
        compare(
            m,
            [r.reports[TREATMENT].metric(m) for r in by_seed],
            [r.reports[control].metric(m) for r in by_seed],
        )
        for m in sorted(names)
    ]


def _comparisons_csv(comparisons: dict[str, list[PairedComparison]]) -> str:
    rows = ["metric,control,wins,losses,ties,undefined,median_diff,median_diff_decimal"]
    for control in sorted(comparisons):
        for pc in comparisons[control]:
            rows.append(
                f"{pc.metric},{control},{pc.wins},{pc.losses},{pc.ties},{pc.undefined},"
                f"{render_exact(pc.median_diff)},{render_decimal(pc.median_diff)}"
            )
    return "\n".join(rows) + "\n"


def _write_manifest(out: Path, files: list[Path], status: str) -> None:
    lines = []
    for p in sorted(files):
        size = p.stat().st_size if p.exists() else 0
        lines.append(f"{size} {p.relative_to(out).as_posix()}")
    lines.append(f"status {status}")
    _write(out / "MANIFEST", "\n".join(lines) + "\n")

