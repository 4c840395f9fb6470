"""Selection results, their trace, and the JSON form written to disk."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import jsonschema
import numpy as np

from .scorer import ScoreValue

__all__ = ["TraceRow", "SelectionResult", "RESULT_SCHEMA", "Tracker"]

RESULT_FORMAT_VERSION = 1

_SCORE_SCHEMA = {
    "type": "object",
    "required": ["accuracy", "n_correct", "n_eval_samples"],
    "properties": {
        "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "n_correct": {"type": "integer", "minimum": 0},
        "n_eval_samples": {"type": "integer", "minimum": 1},
    },
}

RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "blockselect selection result",
    "type": "object",
    "required": ["format_version", "method", "columns", "mask", "selected",
                 "score", "inner_score", "evaluations", "phase_boundaries",
                 "trace", "fingerprint"],
    "properties": {
        "format_version": {"const": RESULT_FORMAT_VERSION},
        "method": {"type": "string"},
        "columns": {"type": "array", "items": {"type": "string"}},
        "mask": {"type": "array", "items": {"enum": [0, 1]}, "minItems": 1},
        "selected": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "score": _SCORE_SCHEMA,
        "inner_score": _SCORE_SCHEMA,
        "evaluations": {"type": "integer", "minimum": 0},
        "phase_boundaries": {"type": "object",
                             "additionalProperties": {"type": "integer", "minimum": 0}},
        "trace": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["evaluation", "score", "popcount", "phase"],
                "properties": {
                    "evaluation": {"type": "integer", "minimum": 0},
                    "score": {"type": "number", "minimum": 0, "maximum": 1},
                    "popcount": {"type": "integer", "minimum": 1},
                    "phase": {"type": "string"},
                },
            },
        },
        "fingerprint": {"type": "string"},
        "stop_reason": {"type": "string"},
        "config": {"type": "object"},
        "assumptions": {"type": "array", "items": {"type": "string"}},
        "seed": {"type": "integer"},
    },
}


@dataclass(frozen=True)
class TraceRow:
    evaluation: int
    score: float
    popcount: int
    phase: str


@dataclass
class SelectionResult:
    method: str
    mask: np.ndarray
    score: ScoreValue
    inner_score: ScoreValue
    trace: list[TraceRow]
    evaluations: int
    phase_boundaries: dict[str, int]
    fingerprint: str = ""
    stop_reason: str = ""
    config: dict = field(default_factory=dict)
    assumptions: list[str] = field(default_factory=list)

    @property
    def popcount(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def feature_fraction(self) -> float:
        return 100.0 * self.popcount / len(self.mask)

    def to_dict(self, column_names: Sequence[str] | None = None, seed: int | None = None) -> dict:
        if column_names is None:
            column_names = [f"f{i}" for i in range(len(self.mask))]
        doc = {
            "format_version": RESULT_FORMAT_VERSION,
            "method": self.method,
            "columns": list(column_names),
            "mask": [int(b) for b in self.mask],
            "selected": [c for c, b in zip(column_names, self.mask) if b],
            "score": self.score.to_dict(),
            "inner_score": self.inner_score.to_dict(),
            "evaluations": int(self.evaluations),
            "phase_boundaries": {k: int(v) for k, v in self.phase_boundaries.items()},
            "trace": [{"evaluation": r.evaluation, "score": r.score,
                       "popcount": r.popcount, "phase": r.phase} for r in self.trace],
            "fingerprint": self.fingerprint,
            "stop_reason": self.stop_reason,
            "config": self.config,
            "assumptions": list(self.assumptions),
        }
        if seed is not None:
            doc["seed"] = int(seed)
        return doc

    def to_json(self, column_names=None, seed=None) -> str:
        doc = self.to_dict(column_names, seed)
        jsonschema.validate(doc, RESULT_SCHEMA)
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "SelectionResult":
        jsonschema.validate(doc, RESULT_SCHEMA)

        def score(d):
            return ScoreValue(d["n_correct"], d["n_eval_samples"])

        return cls(
            method=doc["method"],
            mask=np.asarray(doc["mask"], dtype=np.int8),
            score=score(doc["score"]),
            inner_score=score(doc["inner_score"]),
            trace=[TraceRow(r["evaluation"], r["score"], r["popcount"], r["phase"])
                   for r in doc["trace"]],
            evaluations=doc["evaluations"],
            phase_boundaries=dict(doc["phase_boundaries"]),
            fingerprint=doc["fingerprint"],
            stop_reason=doc.get("stop_reason", ""),
            config=doc.get("config", {}),
            assumptions=list(doc.get("assumptions", [])),
        )

    def trace_is_monotone(self) -> bool:
        scores = [r.score for r in self.trace]
        return all(a <= b for a, b in zip(scores, scores[1:]))


class Tracker:
    """Collects accepted states while a selector runs."""

    def __init__(self, scorer):
        self.scorer = scorer
        self.rows: list[TraceRow] = []
        self.boundaries: dict[str, int] = {}

    def accept(self, mask, score: ScoreValue, phase: str) -> None:
        self.rows.append(TraceRow(self.scorer.evaluations, score.accuracy,
                                  int(np.count_nonzero(mask)), phase))

    def end_phase(self, phase: str) -> None:
        self.boundaries[phase] = self.scorer.evaluations
