"""Model and numerical constants."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

FormVariant = Literal["consistent", "inconsistent"]


@dataclass(frozen=True)
class ModelParams:
    # defaults: oily-streak-like values used for all convergence studies
    a1: float = -10.0
    a2: float = 0.0
    a3: float = 10.0
    B: float = 1e-5
    K: float = 0.3
    l: float = 30.0
    q: float = 0.0
    epsilon: float = 1.0
    form_variant: FormVariant = "consistent"

    def __post_init__(self):
        checks = {"a3": self.a3 > 0, "B": self.B > 0, "K": self.K > 0, "l": self.l > 0,
                  "q": self.q >= 0, "epsilon": self.epsilon > 0}
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ValueError(f"invalid model parameters: {', '.join(bad)}")
        if self.form_variant not in ("consistent", "inconsistent"):
            raise ValueError(f"unknown form variant {self.form_variant!r}")

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)
