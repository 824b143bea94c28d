"""Axis-aligned geometry for the space-time cylinder ]0,T[ x Omega."""

from dataclasses import dataclass, field

from .errors import ValidationError


@dataclass(frozen=True)
class Rect:
    """Axis-aligned open rectangle ]x1min,x1max[ x ]x2min,x2max[."""

    x1min: float
    x1max: float
    x2min: float
    x2max: float

    def __post_init__(self):
        if not (self.x1min < self.x1max and self.x2min < self.x2max):
            raise ValidationError(f"degenerate rectangle {self}")

    @property
    def center(self):
        return (0.5 * (self.x1min + self.x1max), 0.5 * (self.x2min + self.x2max))

    def contains(self, x1, x2, closed=False):
        """Pointwise membership; open by default. Accepts scalars or arrays."""
        if closed:
            return (
                (x1 >= self.x1min) & (x1 <= self.x1max)
                & (x2 >= self.x2min) & (x2 <= self.x2max)
            )
        return (
            (x1 > self.x1min) & (x1 < self.x1max)
            & (x2 > self.x2min) & (x2 < self.x2max)
        )

    def strictly_inside(self, other):
        """True if the closure of self lies inside the open rectangle `other`."""
        return (
            self.x1min > other.x1min and self.x1max < other.x1max
            and self.x2min > other.x2min and self.x2max < other.x2max
        )

    def inset(self, fraction):
        """Shrink by `fraction` of each side length (toward the center)."""
        dx1 = fraction * (self.x1max - self.x1min)
        dx2 = fraction * (self.x2max - self.x2min)
        return Rect(self.x1min + dx1, self.x1max - dx1,
                    self.x2min + dx2, self.x2max - dx2)

    def gap_to(self, other):
        """Minimal margin between self and the boundary of the enclosing `other`."""
        return min(
            self.x1min - other.x1min, other.x1max - self.x1max,
            self.x2min - other.x2min, other.x2max - self.x2max,
        )


def _default_omega1(omega):
    return omega.inset(0.10)


@dataclass(frozen=True)
class BoxDomain:
    """Rectangular flow domain Omega = ]0,a[ x ]0,b[ over the horizon [0,T].

    `omega` is the control region (compactly inside Omega) and `omega1` the
    inner observation region (compactly inside omega).  When `omega1` is not
    given it defaults to `omega` inset by 10% of its side lengths.
    """

    a: float
    b: float
    T: float
    omega: Rect
    omega1: Rect = field(default=None)

    def __post_init__(self):
        if min(self.a, self.b, self.T) <= 0:
            raise ValidationError("domain extents a, b, T must be positive")
        if self.omega1 is None:
            object.__setattr__(self, "omega1", _default_omega1(self.omega))
        box = Rect(0.0, self.a, 0.0, self.b)
        if not self.omega.strictly_inside(box):
            raise ValidationError("omega must be compactly contained in Omega")
        if not self.omega1.strictly_inside(self.omega):
            raise ValidationError("omega1 must be compactly contained in omega")

    @property
    def rect(self):
        return Rect(0.0, self.a, 0.0, self.b)

    @property
    def volume(self):
        """Measure of the space-time cylinder Q."""
        return self.a * self.b * self.T
