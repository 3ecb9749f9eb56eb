"""Movable Access Window (MAW) geometry.

The MAW is a transparent rotary insert laminated into the hive glazing
panel. The panel carries a circular aperture; a three-layer laminate disc
drops into it and provides a sealed, rotating feed-through for the tool
shaft. All dimensions are millimeters; there is no unit conversion layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import CombError

MIN_CRACK_MARGIN = 10.0
DEFAULT_CLEARANCE = 0.3  # midpoint of the typical 0.2-0.4 mm running clearance
CLEARANCE_RANGE = (0.2, 0.4)
DEFAULT_SHAFT_RADIUS = 5.0
EXACTNESS_TOL = 1e-12


class MarginTooSmall(CombError):
    pass


class NonPositiveRadius(CombError):
    pass


class InvalidSeal(CombError):
    pass


def aperture_radius(panel_width: float, crack_margin: float = MIN_CRACK_MARGIN) -> float:
    """Radius of the circular aperture cut into the glazing panel.

    The margin keeps material between the cut edge and the panel borders
    to resist cracking and mounting loads; it must be at least 10 mm.
    """
    if panel_width <= 0:
        raise NonPositiveRadius(f"panel width must be positive, got {panel_width}")
    if crack_margin < MIN_CRACK_MARGIN:
        raise MarginTooSmall(
            f"crack margin {crack_margin} mm is below the {MIN_CRACK_MARGIN} mm minimum"
        )
    radius = panel_width / 2.0 - crack_margin
    if radius <= 0:
        raise NonPositiveRadius(
            f"panel width {panel_width} mm leaves no aperture after a "
            f"{crack_margin} mm margin"
        )
    return radius


@dataclass(frozen=True)
class InsertGeometry:
    """Radii of the laminate layers forming the rotary insert.

    Two outer discs (radius ``disc_outer``, inner cutout ``disc_inner``)
    sandwich a spacer ring; the radial overlap ``seal_overlap`` between the
    ring and the panel edge sets the seal path length, while the running
    clearance keeps the insert free to rotate.
    """

    aperture: float
    seal_overlap: float
    clearance: float
    shaft_radius: float
    disc_inner: float          # r = R - s - eps
    disc_outer: float          # R - eps
    ring_outer: float          # R - eps
    ring_inner: float          # disc_inner
    small_disc_radius: float   # nested disc; defaults to disc_inner
    small_disc_cutout: float   # shaft pass-through


def insert_geometry(
    aperture: float,
    seal_overlap: float,
    clearance: float = DEFAULT_CLEARANCE,
    shaft_radius: float = DEFAULT_SHAFT_RADIUS,
    small_disc_radius: float | None = None,
) -> InsertGeometry:
    """Derive laminate layer radii for an aperture of radius ``aperture``."""
    if clearance <= 0:
        raise InvalidSeal(f"running clearance must be positive, got {clearance}")
    if seal_overlap <= 0:
        raise InvalidSeal(f"seal overlap must be positive, got {seal_overlap}")
    if aperture <= seal_overlap + clearance:
        raise InvalidSeal(
            f"aperture radius {aperture} mm cannot house a {seal_overlap} mm seal "
            f"plus {clearance} mm clearance"
        )
    inner = aperture - seal_overlap - clearance
    outer = aperture - clearance
    if small_disc_radius is None:
        small_disc_radius = inner
    return InsertGeometry(
        aperture=aperture,
        seal_overlap=seal_overlap,
        clearance=clearance,
        shaft_radius=shaft_radius,
        disc_inner=inner,
        disc_outer=outer,
        ring_outer=outer,
        ring_inner=inner,
        small_disc_radius=small_disc_radius,
        small_disc_cutout=shaft_radius,
    )


@dataclass(frozen=True)
class MawSpec:
    """Complete window specification: panel dimensions plus derived insert radii."""

    panel_length: float
    panel_width: float
    crack_margin: float = MIN_CRACK_MARGIN
    seal_overlap: float = 5.0
    clearance: float = DEFAULT_CLEARANCE
    shaft_radius: float = DEFAULT_SHAFT_RADIUS
    small_disc_radius: float | None = None
    aperture: float = field(init=False)
    disc_inner: float = field(init=False)
    insert: InsertGeometry = field(init=False, repr=False)

    def __post_init__(self):
        if self.panel_length <= 0:
            raise NonPositiveRadius(f"panel length must be positive, got {self.panel_length}")
        radius = aperture_radius(self.panel_width, self.crack_margin)
        ins = insert_geometry(
            radius,
            self.seal_overlap,
            self.clearance,
            self.shaft_radius,
            self.small_disc_radius,
        )
        object.__setattr__(self, "aperture", radius)
        object.__setattr__(self, "disc_inner", ins.disc_inner)
        object.__setattr__(self, "insert", ins)

    @property
    def clearance_in_typical_range(self) -> bool:
        lo, hi = CLEARANCE_RANGE
        return lo <= self.clearance <= hi

    def warnings(self) -> list[str]:
        notes = []
        if not self.clearance_in_typical_range:
            notes.append(
                f"running clearance {self.clearance} mm is outside the typical "
                f"{CLEARANCE_RANGE[0]}-{CLEARANCE_RANGE[1]} mm range"
            )
        if self.panel_length < self.panel_width:
            notes.append("panel length is smaller than panel width; check orientation")
        return notes

    def check_exact(self) -> None:
        """Derived radii must satisfy r + s + eps = R to within 1e-12 mm."""
        residual = abs(self.disc_inner + self.seal_overlap + self.clearance - self.aperture)
        if residual > EXACTNESS_TOL:
            raise InvalidSeal(f"radius identity violated by {residual} mm")

    def to_dict(self) -> dict:
        return {
            "L": self.panel_length,
            "B": self.panel_width,
            "c": self.crack_margin,
            "s": self.seal_overlap,
            "eps": self.clearance,
            "shaft_radius": self.shaft_radius,
            "small_disc_radius": self.insert.small_disc_radius,
            "derived": {
                "aperture_radius": self.aperture,
                "disc_inner_radius": self.disc_inner,
                "insert_outer_radius": self.insert.disc_outer,
                "ring_inner_radius": self.insert.ring_inner,
                "ring_outer_radius": self.insert.ring_outer,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MawSpec":
        return cls(
            panel_length=float(d["L"]),
            panel_width=float(d["B"]),
            crack_margin=float(d.get("c", MIN_CRACK_MARGIN)),
            seal_overlap=float(d.get("s", 5.0)),
            clearance=float(d.get("eps", DEFAULT_CLEARANCE)),
            shaft_radius=float(d.get("shaft_radius", DEFAULT_SHAFT_RADIUS)),
            small_disc_radius=(
                float(d["small_disc_radius"]) if "small_disc_radius" in d else None
            ),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MawSpec":
        return cls.from_dict(json.loads(text))
