"""Experiment runner: full object/finger sweep with repeated trials.

Reproduces the reference study layout - every built-in object crossed with
both finger sets, five trials each by default - and renders the
success/failure matrix as a fixed-width table (the committed golden file),
JSON, or CSV.  Deterministic mode must reproduce the golden bytes exactly;
stochastic mode uses seeds derived from one base seed per (object, finger,
repetition), so any subset of the suite is independently reproducible.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import (
    FingerType,
    ObjectSpec,
    ShapeClass,
    StageOutcome,
    StageOutcomeKind,
    TrialResult,
    builtin_objects,
)
from .rig import Rig
from .rng import derive_seed
from .sequencer import PHYSICAL_STAGES, SequencePlan, Sequencer, TraceSink
from .world import World, load_rules

DEFAULT_REPETITIONS = 5
DEFAULT_TARGET_YAW = 90.0
DEFAULT_ROTATION_SPEED = 600.0

FINGER_ORDER = (FingerType.MOULDED_OVAL, FingerType.PRINTED)


@dataclass(frozen=True)
class PairReport:
    obj: ObjectSpec
    finger_type: FingerType
    trials: tuple[TrialResult, ...]

    @property
    def successes(self) -> int:
        return sum(1 for t in self.trials if t.overall_success)

    @property
    def success_rate(self) -> float:
        return self.successes / len(self.trials)

    def stage_failure_histogram(self) -> dict[str, int]:
        hist: dict[str, int] = {}
        for trial in self.trials:
            for rec in trial.stage_outcomes:
                if rec.outcome is StageOutcomeKind.FAILED:
                    hist[rec.stage] = hist.get(rec.stage, 0) + 1
        return hist


@dataclass(frozen=True)
class ExperimentReport:
    pairs: tuple[PairReport, ...]
    repetitions: int
    mode: str  # "det" or "stoch"
    seed: int

    def pair(self, obj_name: str, ftype: FingerType) -> PairReport:
        for p in self.pairs:
            if p.obj.name == obj_name and p.finger_type == ftype:
                return p
        raise KeyError((obj_name, ftype))


def run_suite(
    rig: Optional[Rig] = None,
    mode: str = "det",
    seed: int = 0,
    repetitions: int = DEFAULT_REPETITIONS,
    objects: Optional[list[ObjectSpec]] = None,
    fingers: tuple[FingerType, ...] = FINGER_ORDER,
    rules_path: Optional[Path] = None,
    target_yaw: float = DEFAULT_TARGET_YAW,
    rotation_speed: float = DEFAULT_ROTATION_SPEED,
    trace: Optional[TraceSink] = None,
) -> ExperimentReport:
    """Run repetitions of the full pipeline for every (object, finger) pair."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if mode not in ("det", "stoch"):
        raise ValueError("mode must be 'det' or 'stoch'")
    rig = rig or Rig.default()
    rules = load_rules(rules_path)
    world = World(rules, rig, deterministic=(mode == "det"))
    sequencer = Sequencer(world)
    objs = objects if objects is not None else builtin_objects()

    pairs = []
    for obj in objs:
        for ftype in fingers:
            plan = SequencePlan(
                obj=obj,
                finger_type=ftype,
                target_yaw=target_yaw,
                rotation_speed=rotation_speed,
            )
            trials = []
            for rep in range(repetitions):
                trial_seed = derive_seed(seed, obj.name, ftype.value, rep)
                trials.append(sequencer.run_trial(plan, trial_seed, trace=trace))
            pairs.append(PairReport(obj=obj, finger_type=ftype, trials=tuple(trials)))
    return ExperimentReport(
        pairs=tuple(pairs), repetitions=repetitions, mode=mode, seed=seed
    )


# -- rendering -------------------------------------------------------------


def render_report(report: ExperimentReport, fmt: str = "table") -> str:
    if not report.pairs or not report.pairs[0].trials:
        raise ValueError("cannot render an empty report")
    if fmt == "table":
        return _render_table(report)
    if fmt == "json":
        return _render_json(report)
    if fmt == "csv":
        return _render_csv(report)
    raise ValueError(f"unknown format {fmt!r}")


def _finger_label(ftype: FingerType) -> str:
    return {"moulded_oval": "moulded", "printed": "printed"}[ftype.value]


def _render_table(report: ExperimentReport) -> str:
    lines = []
    lines.append(f"manipulation suite  mode={report.mode}  reps={report.repetitions}")
    header = f"{'object':<24}{'mass(g)':>8}  {'fingers':<8}{'success':>8}  failed stages"
    lines.append(header)
    lines.append("-" * len(header))
    for pair in report.pairs:
        hist = pair.stage_failure_histogram()
        failures = " ".join(
            f"{stage.value}x{hist[stage.value]}"
            for stage in PHYSICAL_STAGES
            if stage.value in hist
        )
        lines.append(
            f"{pair.obj.name:<24}{pair.obj.mass:>8.0f}  {_finger_label(pair.finger_type):<8}"
            f"{pair.successes:>4}/{len(pair.trials):<3} {failures}".rstrip()
        )
    return "\n".join(lines) + "\n"


def _render_json(report: ExperimentReport) -> str:
    doc = {
        "mode": report.mode,
        "seed": report.seed,
        "repetitions": report.repetitions,
        "pairs": [
            {
                "object": pair.obj.to_dict(),
                "finger_type": pair.finger_type.value,
                "successes": pair.successes,
                "stage_failure_histogram": pair.stage_failure_histogram(),
                "trials": [t.to_dict() for t in pair.trials],
            }
            for pair in report.pairs
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


_CSV_COLUMNS = [
    "object",
    "mass_g",
    "shape_class",
    "width_mm",
    "height_mm",
    "cloth_like",
    "com_height_frac",
    "finger_type",
    "repetition",
    "seed",
    "overall_success",
    "stage_outcomes",
]


def _encode_stage_outcomes(trial: TrialResult) -> str:
    tokens = []
    for rec in trial.stage_outcomes:
        token = f"{rec.stage}={rec.outcome.value}"
        if rec.failure_detail:
            token += f":{rec.failure_detail}"
        if rec.note:
            token += f"+{rec.note}"
        if rec.restarted:
            token += "!"
        tokens.append(token)
    return ";".join(tokens)


def _decode_stage_outcomes(text: str) -> tuple[StageOutcome, ...]:
    records = []
    for token in text.split(";"):
        head, _, tail = token.partition("=")
        restarted = tail.endswith("!")
        if restarted:
            tail = tail[:-1]
        note = None
        if "+" in tail:
            tail, note = tail.split("+", 1)
        failure = None
        if ":" in tail:
            tail, failure = tail.split(":", 1)
        records.append(
            StageOutcome(
                stage=head,
                outcome=StageOutcomeKind(tail),
                failure_detail=failure,
                note=note,
                restarted=restarted,
            )
        )
    return tuple(records)


def _render_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mode", report.mode, "seed", report.seed, "repetitions", report.repetitions])
    writer.writerow(_CSV_COLUMNS)
    for pair in report.pairs:
        for rep, trial in enumerate(pair.trials):
            writer.writerow(
                [
                    pair.obj.name,
                    repr(pair.obj.mass),
                    pair.obj.shape_class.value,
                    repr(pair.obj.characteristic_width),
                    repr(pair.obj.height),
                    int(pair.obj.cloth_like),
                    repr(pair.obj.com_height_frac),
                    pair.finger_type.value,
                    rep,
                    trial.seed,
                    int(trial.overall_success),
                    _encode_stage_outcomes(trial),
                ]
            )
    return buf.getvalue()


def parse_csv(text: str) -> ExperimentReport:
    """Inverse of the CSV renderer; render(parse(render(r))) == render(r)."""
    rows = list(csv.reader(io.StringIO(text)))
    meta, header, data = rows[0], rows[1], rows[2:]
    if header != _CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    mode, seed, repetitions = meta[1], int(meta[3]), int(meta[5])

    grouped: dict[tuple[str, str], list[TrialResult]] = {}
    objects: dict[tuple[str, str], ObjectSpec] = {}
    order: list[tuple[str, str]] = []
    for row in data:
        obj = ObjectSpec(
            name=row[0],
            mass=float(row[1]),
            shape_class=ShapeClass(row[2]),
            characteristic_width=float(row[3]),
            height=float(row[4]),
            cloth_like=bool(int(row[5])),
            com_height_frac=float(row[6]),
        )
        key = (row[0], row[7])
        if key not in grouped:
            grouped[key] = []
            objects[key] = obj
            order.append(key)
        records = _decode_stage_outcomes(row[11])
        grouped[key].append(
            TrialResult(
                obj=obj,
                finger_type=FingerType(row[7]),
                stage_outcomes=records,
                overall_success=bool(int(row[10])),
                seed=int(row[9]),
            )
        )
    pairs = tuple(
        PairReport(obj=objects[key], finger_type=FingerType(key[1]), trials=tuple(grouped[key]))
        for key in order
    )
    return ExperimentReport(pairs=pairs, repetitions=repetitions, mode=mode, seed=seed)
