"""Verification reports."""

import json
from dataclasses import dataclass, field
from typing import Any, Literal, Optional

import numpy as np

Verdict = Literal["pass", "fail", "inconclusive"]

EXIT_CODES: dict[str, int] = {"pass": 0, "fail": 1, "inconclusive": 4}

# Witness lists are capped; the worst violations are kept.
MAX_WITNESSES = 10


@dataclass(frozen=True)
class Witness:
    """A state (and time or horizon) where a check was measured against its requirement."""

    state: tuple[float, ...]
    time: float
    measured: float
    required: float

    def to_dict(self) -> dict:
        return {
            "x": list(self.state),
            "t_or_T": self.time,
            "measured": self.measured,
            "required": self.required,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Witness":
        return cls(
            state=tuple(float(v) for v in data["x"]),
            time=float(data["t_or_T"]),
            measured=float(data["measured"]),
            required=float(data["required"]),
        )

    @classmethod
    def at(cls, state: Any, time: float, measured: float, required: float) -> "Witness":
        return cls(
            tuple(float(v) for v in np.atleast_1d(state)),
            float(time),
            float(measured),
            float(required),
        )


@dataclass
class Report:
    """Outcome of one verification check.

    Invariants:
        - a failing report carries at least one witness
        - a passing report has ``max_violation <= tolerances["tol"]``
    """

    verdict: Verdict
    max_violation: float = 0.0
    witnesses: list[Witness] = field(default_factory=list)
    tolerances: dict[str, float] = field(default_factory=dict)
    label: str = ""
    notes: list[str] = field(default_factory=list)
    checked: int = 0
    components: list["Report"] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.verdict not in EXIT_CODES:
            raise ValueError(f"verdict must be pass, fail or inconclusive, got {self.verdict}")
        if self.verdict == "fail" and not self.witnesses:
            raise ValueError(f"failing report '{self.label}' needs at least one witness")
        tol = self.tolerances.get("tol")
        if self.verdict == "pass" and tol is not None and self.max_violation > tol:
            raise ValueError(
                f"passing report '{self.label}' has max_violation {self.max_violation} > tol {tol}"
            )

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def to_dict(self) -> dict:
        """Serialize to dictionary."""
        data: dict[str, Any] = {
            "verdict": self.verdict,
            "max_violation": self.max_violation,
            "tolerances": dict(self.tolerances),
            "witnesses": [w.to_dict() for w in self.witnesses],
        }
        if self.label:
            data["label"] = self.label
        if self.notes:
            data["notes"] = list(self.notes)
        data["checked"] = self.checked
        if self.components:
            data["components"] = [c.to_dict() for c in self.components]
        return data

    def to_json(self) -> str:
        """Serialize to JSON string."""
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        """Deserialize from dictionary."""
        return cls(
            verdict=data["verdict"],
            max_violation=float(data.get("max_violation", 0.0)),
            witnesses=[Witness.from_dict(w) for w in data.get("witnesses", [])],
            tolerances=dict(data.get("tolerances", {})),
            label=data.get("label", ""),
            notes=list(data.get("notes", [])),
            checked=int(data.get("checked", 0)),
            components=[cls.from_dict(c) for c in data.get("components", [])],
        )

    def summary(self) -> str:
        """One human-readable line."""
        name = self.label or "check"
        text = f"[{self.verdict.upper()}] {name}: max_violation={self.max_violation:.3g}"
        tol = self.tolerances.get("tol")
        if tol is not None:
            text += f" (tol={tol:.3g})"
        if self.checked:
            text += f", checked={self.checked}"
        return text

    @classmethod
    def combine(
        cls, label: str, reports: list["Report"], notes: Optional[list[str]] = None
    ) -> "Report":
        """Conjunction of several reports: fail beats inconclusive beats pass."""
        if not reports:
            raise ValueError("combine needs at least one report")
        verdicts = {r.verdict for r in reports}
        verdict: Verdict = "pass"
        if "fail" in verdicts:
            verdict = "fail"
        elif "inconclusive" in verdicts:
            verdict = "inconclusive"
        witnesses = [w for r in reports if r.verdict == "fail" for w in r.witnesses]
        tols = [r.tolerances["tol"] for r in reports if "tol" in r.tolerances]
        return cls(
            verdict=verdict,
            max_violation=max(r.max_violation for r in reports),
            witnesses=witnesses[:MAX_WITNESSES],
            tolerances={"tol": max(tols)} if tols else {},
            label=label,
            notes=list(notes or []),
            checked=sum(r.checked for r in reports),
            components=list(reports),
        )


def worst_witnesses(
    states: np.ndarray,
    times: np.ndarray,
    measured: np.ndarray,
    required: np.ndarray,
    violation: np.ndarray,
    tol: float,
) -> list[Witness]:
    """Witnesses for entries whose violation exceeds ``tol``, worst first."""
    order = np.argsort(-violation, kind="stable")
    picked = [i for i in order[:MAX_WITNESSES] if violation[i] > tol]
    return [
        Witness.at(states[i], float(times[i]), float(measured[i]), float(required[i]))
        for i in picked
    ]
