"""Check reports: named residuals with a tolerance and a verdict."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


@dataclass
class CheckReport:
    check: str
    model: str
    residuals: list[tuple[str, float]]
    tolerance: float
    window: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    verdict_override: str | None = None

    @property
    def residual_max(self) -> float:
        if not self.residuals:
            return 0.0
        return max(float(r) for _, r in self.residuals)

    @property
    def verdict(self) -> str:
        if self.verdict_override is not None:
            return self.verdict_override
        ok = all(math.isfinite(r) and r < self.tolerance for _, r in self.residuals)
        return "pass" if ok else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def worst(self) -> tuple[str, float] | None:
        if not self.residuals:
            return None
        return max(self.residuals, key=lambda lr: lr[1])

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "model": self.model,
            "residuals": [[lab, float(r)] for lab, r in self.residuals],
            "tolerance": self.tolerance,
            "window": self.window,
            "verdict": self.verdict,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def __str__(self):
        w = self.worst()
        tail = f"worst {w[0]} = {w[1]:.3e}" if w else "no residuals"
        return f"{self.check} [{self.model}]: {self.verdict} ({tail}, tol {self.tolerance:.1e})"
