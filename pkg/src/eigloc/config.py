"""Global tolerance constants.

Every module reads its thresholds from :data:`TOL`; campaign configs may
override individual fields through :func:`with_overrides`.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    membership: float = 1e-9
    geometric: float = 1e-6
    orthogonality: float = 1e-12
    john_gap: float = 1e-10
    solver: float = 1e-8
    max_outer_steps: int = 200
    # grid nodes closer than this fraction of h to the boundary are dropped
    theta_min: float = 1e-3
    axis_tie: float = 1e-9


TOL = Tolerances()


def with_overrides(base: Tolerances = TOL, **overrides) -> Tolerances:
    known = {f.name: f.type for f in fields(Tolerances)}
    clean = {}
    for key, value in overrides.items():
        if key not in known:
            raise KeyError(f"unknown tolerance {key!r}")
        clean[key] = int(value) if key == "max_outer_steps" else float(value)
    return replace(base, **clean)
