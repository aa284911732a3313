"""Sup-norm ball, rectangle and dyadic-cube primitives.

All coordinates are exact rationals (`fractions.Fraction`).  Inputs given as
ints, floats or decimal strings are converted exactly (every binary64 float
*is* a dyadic rational), so containment / disjointness tests performed here
are exact for anything that reached us through normal numeric channels.

Conventions, used consistently by every other module:

* balls are closed, and the norm is the sup norm, so a ball is an
  axis-aligned closed box;
* the diameter of ``Ball(c, r)`` is ``2*r``;
* tangent closed balls count as intersecting;
* dyadic cubes of generation ``k`` are the half-open boxes
  ``prod_i [j_i/2^k, (j_i+1)/2^k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


def as_fraction(x) -> Fraction:
    """Convert a number to an exact Fraction (floats convert exactly)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite coordinate: {x!r}")
        return Fraction(x)
    return Fraction(x)


def as_point(coords) -> tuple[Fraction, ...]:
    if isinstance(coords, (int, float, Fraction, str)):
        return (as_fraction(coords),)
    return tuple(as_fraction(c) for c in coords)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its lower and upper corners.

    Open/closed semantics are not baked in; each consumer states which
    convention it applies.
    """

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi)
        if len(lo) != len(hi):
            raise ValueError("corner dimension mismatch")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> tuple[Fraction, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def is_empty(self) -> bool:
        return any(h < l for l, h in zip(self.lo, self.hi))

    def volume(self) -> Fraction:
        v = Fraction(1)
        for l, h in zip(self.lo, self.hi):
            if h <= l:
                return Fraction(0)
            v *= h - l
        return v

    def intersection(self, other: "Box") -> "Box | None":
        """Closed-closed intersection, or None when empty."""
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(h < l for l, h in zip(lo, hi)):
            return None
        return Box(lo, hi)

    def intersects_closed(self, other: "Box") -> bool:
        return all(
            o_lo <= s_hi and s_lo <= o_hi
            for s_lo, s_hi, o_lo, o_hi in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def contains_closed(self, other: "Box") -> bool:
        """self (closed) contains other (closed)."""
        return all(
            s_lo <= o_lo and o_hi <= s_hi
            for s_lo, s_hi, o_lo, o_hi in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def contains_closed_strictly(self, other: "Box") -> bool:
        """other (closed) lies in the interior of self."""
        return all(
            s_lo < o_lo and o_hi < s_hi
            for s_lo, s_hi, o_lo, o_hi in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def contains_point(self, p, closed: bool = True) -> bool:
        p = as_point(p)
        if closed:
            return all(l <= x <= h for l, x, h in zip(self.lo, p, self.hi))
        return all(l < x < h for l, x, h in zip(self.lo, p, self.hi))


@dataclass(frozen=True)
class Ball:
    """Closed sup-norm ball: the atomic object of every sequence."""

    center: tuple[Fraction, ...]
    radius: Fraction

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "radius", as_fraction(self.radius))
        if self.radius <= 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> Fraction:
        return 2 * self.radius

    def as_box(self) -> Box:
        return Box(
            tuple(c - self.radius for c in self.center),
            tuple(c + self.radius for c in self.center),
        )

    def contains_point(self, p) -> bool:
        p = as_point(p)
        return all(abs(x - c) <= self.radius for x, c in zip(p, self.center))

    def contains_ball(self, other: "Ball") -> bool:
        return all(
            abs(x - c) + other.radius <= self.radius
            for x, c in zip(other.center, self.center)
        )


@dataclass(frozen=True)
class Rectangle:
    """Open anisotropic rectangle attached to a parent ball.

    Side ``i`` has length ``base_radius ** tau[i]``; the box is centered at
    ``center``.  ``tau`` must be non-decreasing with ``tau[0] >= 1`` so the
    rectangle stays inside the parent ball whenever ``base_radius <= 1``.
    """

    center: tuple[Fraction, ...]
    base_radius: Fraction
    tau: tuple[Fraction, ...]

    def __post_init__(self):
        center = as_point(self.center)
        radius = as_fraction(self.base_radius)
        tau = as_point(self.tau)
        if radius <= 0:
            raise ValueError("base_radius must be positive")
        if len(tau) != len(center):
            raise ValueError("tau dimension mismatch")
        if tau[0] < 1:
            raise ValueError(f"tau[0] must be >= 1, got {tau[0]}")
        if any(a > b for a, b in zip(tau, tau[1:])):
            raise ValueError(f"tau must be non-decreasing, got {tuple(map(float, tau))}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "base_radius", radius)
        object.__setattr__(self, "tau", tau)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def sides(self) -> tuple[Fraction, ...]:
        return tuple(_rational_pow(self.base_radius, t) for t in self.tau)

    def as_box(self) -> Box:
        half = tuple(s / 2 for s in self.sides)
        return Box(
            tuple(c - h for c, h in zip(self.center, half)),
            tuple(c + h for c, h in zip(self.center, half)),
        )


@dataclass(frozen=True)
class DyadicCube:
    """Half-open dyadic cube of generation k with integer corner indices."""

    generation: int
    indices: tuple[int, ...]

    def __post_init__(self):
        if self.generation < 0:
            raise ValueError("generation must be >= 0")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    @property
    def dim(self) -> int:
        return len(self.indices)

    @property
    def side(self) -> Fraction:
        return Fraction(1, 2**self.generation)

    def box(self) -> Box:
        s = self.side
        lo = tuple(i * s for i in self.indices)
        return Box(lo, tuple(l + s for l in lo))

    def contains_point(self, p) -> bool:
        p = as_point(p)
        s = self.side
        return all(i * s <= x < (i + 1) * s for i, x in zip(self.indices, p))

    def children(self) -> list["DyadicCube"]:
        k = self.generation + 1
        base = tuple(2 * i for i in self.indices)
        out = []
        for mask in range(2 ** self.dim):
            idx = tuple(base[j] + ((mask >> j) & 1) for j in range(self.dim))
            out.append(DyadicCube(k, idx))
        return out


def _rational_pow(r: Fraction, e: Fraction) -> Fraction:
    """r**e, exact when e is a non-negative integer, float-precision otherwise."""
    if e.denominator == 1 and e >= 0:
        return r ** int(e)
    return Fraction(float(r) ** float(e))


def exponent_is_exact(e) -> bool:
    """True when raising a rational to this exponent stays exact."""
    e = as_fraction(e)
    return e.denominator == 1 and e >= 0


def scale_ball(b: Ball, t) -> Ball:
    """Ball with the same center and radius multiplied by t > 0."""
    t = as_fraction(t)
    if t <= 0:
        raise ValueError(f"scale factor must be positive, got {t}")
    return Ball(b.center, t * b.radius)


def contract_ball(b: Ball, delta) -> Ball:
    """Ball with the same center and radius raised to the power delta.

    delta >= 1 contracts when radius < 1; delta < 1 is allowed (an
    expansion) and it is up to the caller to record that mode.  The result
    is exact for integer delta, float-precision otherwise.
    """
    delta = as_fraction(delta)
    return Ball(b.center, _rational_pow(b.radius, delta))


def rectangle_from_ball(b: Ball, tau) -> Rectangle:
    """Open rectangle centered on the ball with side i equal to radius**tau[i]."""
    return Rectangle(b.center, b.radius, tau)


def scale_index(b: Ball) -> int:
    """The unique k >= 0 with 2^(-k-1) < radius <= 2^(-k); -1 when radius > 1.

    The -1 bucket is the flagged "oversized" bucket; callers surfacing scale
    tables must report it separately.
    """
    r = b.radius
    if r > 1:
        return -1
    # radius = a/b with a <= b; the bucket is floor(log2(b/a)) computed exactly
    return (r.denominator // r.numerator).bit_length() - 1


def dyadic_cover(region: Box, k: int) -> list[DyadicCube]:
    """Minimal set of generation-k half-open cubes whose union contains region.

    The region box is treated as closed, so an upper face sitting exactly on
    a cube boundary pulls in the next cube (which contains that face).
    """
    if k < 0:
        raise ValueError("generation must be >= 0")
    scale = 2**k
    ranges = []
    for l, h in zip(region.lo, region.hi):
        if h < l:
            return []
        first = math.floor(l * scale)
        last = math.floor(h * scale)
        ranges.append(range(first, last + 1))
    cubes: list[DyadicCube] = []
    idx = [r.start for r in ranges]
    d = len(ranges)
    while True:
        cubes.append(DyadicCube(k, tuple(idx)))
        j = d - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < ranges[j].stop:
                break
            idx[j] = ranges[j].start
            j -= 1
        if j < 0:
            break
    return cubes


def closed_dyadic_cover_ranges(region: Box, k: int) -> list[range]:
    """Index ranges of the minimal cover of a closed box by *closed* gen-k cubes.

    Used by the content machinery, where cover pieces are closed balls and a
    face on a cube boundary does not need an extra piece.
    """
    scale = 2**k
    out = []
    for l, h in zip(region.lo, region.hi):
        first = math.floor(l * scale)
        last = max(first, math.ceil(h * scale) - 1)
        out.append(range(first, last + 1))
    return out


def _check_same_dim(a: Ball, b: Ball) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def balls_disjoint(a: Ball, b: Ball) -> bool:
    """Exact disjointness of closed balls; tangent balls are NOT disjoint."""
    _check_same_dim(a, b)
    rsum = a.radius + b.radius
    return any(abs(x - y) > rsum for x, y in zip(a.center, b.center))


def balls_intersect_after_scaling(a: Ball, b: Ball, factor) -> bool:
    """Whether factor*a and factor*b (same centers) intersect."""
    factor = as_fraction(factor)
    if factor <= 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    _check_same_dim(a, b)
    rsum = factor * (a.radius + b.radius)
    return all(abs(x - y) <= rsum for x, y in zip(a.center, b.center))
