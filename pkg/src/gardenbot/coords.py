"""Field coordinates, millimeter-integer convention.

The bed is mapped as a Cartesian system: x along the long side, y along the
short side, z downward from the fully-raised head (z = 0 raised, z grows
toward the soil).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Coord2:
    x_mm: int
    y_mm: int

    def distance_to(self, other: "Coord2") -> float:
        return math.hypot(self.x_mm - other.x_mm, self.y_mm - other.y_mm)

    def as_tuple(self) -> tuple[int, int]:
        return (self.x_mm, self.y_mm)


@dataclass(frozen=True, order=True)
class Coord3:
    x_mm: int
    y_mm: int
    z_mm: int

    def xy(self) -> Coord2:
        return Coord2(self.x_mm, self.y_mm)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.x_mm, self.y_mm, self.z_mm)

    def distance_to(self, other: "Coord3") -> float:
        return math.sqrt(
            (self.x_mm - other.x_mm) ** 2
            + (self.y_mm - other.y_mm) ** 2
            + (self.z_mm - other.z_mm) ** 2
        )
