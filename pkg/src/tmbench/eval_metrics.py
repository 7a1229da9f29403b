"""Step-wise judgments, benchmark metrics and small correlation statistics."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

from .instance_gen import BenchmarkInstance
from .transcript_io import PredictedTrace

Weighting = Literal["uniform", "linear"]


@dataclass(frozen=True)
class Judgment:
    id: str
    per_step: tuple[bool, ...]
    halt_ok: bool = True
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def horizon(self) -> int:
        return len(self.per_step)

    @property
    def passed(self) -> bool:
        return self.halt_ok and all(self.per_step)

    @property
    def first_error_step(self) -> int | None:
        for i, ok in enumerate(self.per_step, 1):
            if not ok:
                return i
        if not self.halt_ok:
            return self.horizon + 1
        return None


def compare(inst: BenchmarkInstance, predicted: PredictedTrace) -> Judgment:
    truth = inst.trace.steps
    horizon = min(inst.trace.transitions, inst.max_steps)
    got = predicted.as_dict()
    per_step = tuple(got.get(i) == truth[i] for i in range(1, horizon + 1))
    warnings = list(predicted.warnings)
    if 0 not in got:
        warnings.append("step 0 missing")
    elif got[0] != truth[0]:
        warnings.append("step 0 does not echo the initial queue")
    halt_ok = True
    if inst.trace.halt_step is not None and horizon < inst.max_steps:
        last = predicted.last_step
        halt_ok = predicted.halt_claimed_at == horizon and (last is None or last <= horizon)
    return Judgment(inst.id, per_step, halt_ok, tuple(warnings))


def judge_all(
    instances: Iterable[BenchmarkInstance], predictions: Mapping[str, PredictedTrace]
) -> list[Judgment]:
    """Judge every instance; a missing prediction counts as an empty one."""
    out = [compare(inst, predictions.get(inst.id, PredictedTrace())) for inst in instances]
    return sorted(out, key=lambda j: j.id)


def step_counts(judgments: Sequence[Judgment], i: int) -> tuple[int, int]:
    """``(N_correct(i), N_total(i))``; instances whose truth stops before i are excluded."""
    if i < 1:
        raise ValueError("steps are numbered from 1")
    total = correct = 0
    for j in judgments:
        if j.horizon >= i:
            total += 1
            correct += j.per_step[i - 1]
    return correct, total


def step_accuracy(judgments: Sequence[Judgment], i: int) -> float | None:
    correct, total = step_counts(judgments, i)
    return correct / total if total else None


def accuracy_curve(judgments: Sequence[Judgment], T: int) -> list[float | None]:
    return [step_accuracy(judgments, i) for i in range(1, T + 1)]


def swa_from_curve(acc: Sequence[float | None], weighting: Weighting = "uniform") -> float | None:
    if weighting not in ("uniform", "linear"):
        raise ValueError(f"unknown weighting {weighting!r}")
    num = den = 0.0
    for i, a in enumerate(acc, 1):
        if a is None:
            continue
        w = 1.0 if weighting == "uniform" else float(i)
        num += w * a
        den += w
    return num / den if den else None


def swa(judgments: Sequence[Judgment], weighting: Weighting = "uniform", T: int = 30) -> float | None:
    if T < 1:
        raise ValueError("T must be at least 1")
    return swa_from_curve(accuracy_curve(judgments, T), weighting)


def pass_rate(judgments: Sequence[Judgment]) -> float:
    if not judgments:
        raise ValueError("pass rate of an empty judgment set")
    return sum(j.passed for j in judgments) / len(judgments)


def percent(fraction: float | None) -> float | None:
    """Fraction as a percentage rounded half-up to one decimal."""
    if fraction is None:
        return None
    return float((Decimal(repr(fraction)) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass
class EvalReport:
    model: str
    dataset_id: str
    T: int
    acc: list[float | None]
    n_correct: list[int]
    n_total: list[int]
    swa_uniform: float | None
    swa_linear: float | None
    pass_rate: float
    judgments: list[Judgment] = field(default_factory=list)

    @property
    def n_instances(self) -> int:
        return len(self.judgments)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "dataset_id": self.dataset_id,
            "T": self.T,
            "acc_curve": [
                {"step": i, "acc": a, "n_correct": c, "n_total": t}
                for i, (a, c, t) in enumerate(zip(self.acc, self.n_correct, self.n_total), 1)
            ],
            "swa_uniform": self.swa_uniform,
            "swa_linear": self.swa_linear,
            "pass_rate": self.pass_rate,
            "percent": {
                "swa_uniform": percent(self.swa_uniform),
                "swa_linear": percent(self.swa_linear),
                "pass_rate": percent(self.pass_rate),
            },
            "n_instances": self.n_instances,
            "per_instance": {
                j.id: {
                    "passed": j.passed,
                    "first_error_step": j.first_error_step,
                    "per_step": [int(ok) for ok in j.per_step],
                    "halt_ok": j.halt_ok,
                }
                for j in self.judgments
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> EvalReport:
        curve = d["acc_curve"]
        judgments = [
            Judgment(k, tuple(bool(x) for x in v["per_step"]), v["halt_ok"])
            for k, v in d["per_instance"].items()
        ]
        return cls(
            d["model"], d["dataset_id"], d["T"],
            [c["acc"] for c in curve], [c["n_correct"] for c in curve], [c["n_total"] for c in curve],
            d["swa_uniform"], d["swa_linear"], d["pass_rate"], judgments,
        )

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "acc", "n_correct", "n_total"])
        for i, (a, c, t) in enumerate(zip(self.acc, self.n_correct, self.n_total), 1):
            w.writerow([i, "" if a is None else repr(a), c, t])
        return buf.getvalue()


def evaluate(
    judgments: Sequence[Judgment], *, T: int = 30, model: str = "", dataset_id: str = ""
) -> EvalReport:
    counts = [step_counts(judgments, i) for i in range(1, T + 1)]
    acc = [c / t if t else None for c, t in counts]
    return EvalReport(
        model, dataset_id, T, acc,
        [c for c, _ in counts], [t for _, t in counts],
        swa_from_curve(acc, "uniform"), swa_from_curve(acc, "linear"),
        pass_rate(judgments), sorted(judgments, key=lambda j: j.id),
    )


def write_report(path: str | Path, report: EvalReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n", "utf-8")


def read_report(path: str | Path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text("utf-8")))


# --- statistics -----------------------------------------------------------

class UndefinedCorrelation(ValueError):
    pass


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys):
        raise ValueError("xs and ys differ in length")
    if len(xs) < 2:
        raise ValueError("need at least two points")
    mx, my = _mean(xs), _mean(ys)
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("zero variance")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def minmax_normalize(xs: Sequence[float]) -> list[float]:
    if len(xs) < 2:
        raise ValueError("need at least two values")
    lo, hi = min(xs), max(xs)
    if hi == lo:
        raise ValueError("constant vector cannot be normalized")
    return [(x - lo) / (hi - lo) for x in xs]


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    residuals: tuple[float, ...]


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> LinearFit:
    """Ordinary least squares ``y ~ slope * x + intercept``."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length sequences of at least two points")
    mx, my = _mean(xs), _mean(ys)
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise ValueError("xs is constant")
    slope = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx
    intercept = my - slope * mx
    residuals = tuple(y - (slope * x + intercept) for x, y in zip(xs, ys))
    try:
        r2 = pearson(xs, ys) ** 2
    except UndefinedCorrelation:
        r2 = 1.0  # constant ys lie exactly on the fitted line
    return LinearFit(slope, intercept, r2, residuals)
