"""Resource limits and run configuration."""
from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Limits:
    max_states: int = 20000
    unfold: int = 64
    max_pomset: int = 6
    step_limit: int = 100_000
    max_events: int = 64
    interleave_on_race_only: bool = True

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type in ("int", int) and v <= 0:
                raise ValueError(f"limit {f.name} must be positive, got {v}")

    @classmethod
    def from_env(cls, base: "Limits | None" = None, var: str = "PPTC_LIMITS") -> "Limits":
        """Apply overrides of the form ``max_states=500,unfold=10`` from an env variable."""
        base = base or cls()
        raw = os.environ.get(var, "").strip()
        if not raw:
            return base
        kinds = {f.name: f.type for f in fields(cls)}
        changes = {}
        for item in raw.split(","):
            if not item.strip():
                continue
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in kinds:
                raise ValueError(f"unknown limit {key!r} in {var}")
            if kinds[key] in ("bool", bool):
                changes[key] = val.strip().lower() in ("1", "true", "yes", "on")
            else:
                changes[key] = int(val)
        return replace(base, **changes)


DEFAULT_LIMITS = Limits()


@dataclass(frozen=True)
class RunConfig:
    command: str = ""
    limits: Limits = DEFAULT_LIMITS
    seed: int = 0
    json: bool = False
