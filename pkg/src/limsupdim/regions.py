"""Open sets as finite unions of open axis-aligned boxes.

This is the only open-set representation the covering engine accepts: it
keeps every containment and subtraction test exact (rational corners).

Containment of a closed box in the union is tested against single pieces
after merging strictly-overlapping compatible pieces.  For unions produced
by `subtract_closed_box` this is exact in one dimension; in higher
dimensions a box covered only jointly by several pieces may be reported as
not contained, which keeps the covering engine sound (it only under-selects,
never over-selects).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .geometry import Ball, Box, as_fraction, as_point


@dataclass
class BoxUnion:
    """Finite union of open boxes with rational corners."""

    boxes: list[Box] = field(default_factory=list)

    def __post_init__(self):
        clean = []
        for b in self.boxes:
            if not isinstance(b, Box):
                b = Box(*b)
            if all(h > l for l, h in zip(b.lo, b.hi)):
                clean.append(b)
        self.boxes = clean
        self._merge()

    @classmethod
    def from_box(cls, lo, hi) -> "BoxUnion":
        return cls([Box(as_point(lo), as_point(hi))])

    @property
    def dim(self) -> int:
        if not self.boxes:
            raise ValueError("empty union has no dimension")
        return self.boxes[0].dim

    def is_empty(self) -> bool:
        return not self.boxes

    def copy(self) -> "BoxUnion":
        out = BoxUnion.__new__(BoxUnion)
        out.boxes = list(self.boxes)
        return out

    def _merge(self) -> None:
        # Merge pairs whose union is again a box: equal extents on all axes
        # but one, strictly overlapping (or nested) on the remaining axis.
        changed = True
        while changed:
            changed = False
            n = len(self.boxes)
            for i in range(n):
                for j in range(i + 1, n):
                    m = _merge_pair(self.boxes[i], self.boxes[j])
                    if m is not None:
                        rest = [
                            b for k, b in enumerate(self.boxes) if k not in (i, j)
                        ]
                        self.boxes = rest + [m]
                        changed = True
                        break
                if changed:
                    break

    def contains_closed_box(self, box: Box) -> bool:
        return any(p.contains_closed_strictly(box) for p in self.boxes)

    def contains_ball(self, ball: Ball) -> bool:
        return self.contains_closed_box(ball.as_box())

    def contains_point(self, p) -> bool:
        return any(b.contains_point(p, closed=False) for b in self.boxes)

    def intersects_closed_box(self, box: Box) -> bool:
        # open piece meets closed box iff intervals overlap with nonempty interior
        return any(
            all(bl < h and l < bh for l, h, bl, bh in zip(p.lo, p.hi, box.lo, box.hi))
            for p in self.boxes
        )

    def subtract_closed_box(self, box: Box) -> "BoxUnion":
        """Remove a closed box; the difference is again a union of open boxes."""
        out: list[Box] = []
        for piece in self.boxes:
            if not all(
                bl < h and l < bh
                for l, h, bl, bh in zip(piece.lo, piece.hi, box.lo, box.hi)
            ):
                out.append(piece)
                continue
            # per axis, the two open slabs strictly left/right of the box,
            # with full extents on the other axes (slabs may overlap)
            for ax in range(piece.dim):
                if box.lo[ax] > piece.lo[ax]:
                    hi = list(piece.hi)
                    hi[ax] = min(piece.hi[ax], box.lo[ax])
                    out.append(Box(piece.lo, tuple(hi)))
                if box.hi[ax] < piece.hi[ax]:
                    lo = list(piece.lo)
                    lo[ax] = max(piece.lo[ax], box.hi[ax])
                    out.append(Box(tuple(lo), piece.hi))
        result = BoxUnion.__new__(BoxUnion)
        result.boxes = _dedupe(out)
        result._merge()
        return result

    def subtract_ball(self, ball: Ball) -> "BoxUnion":
        return self.subtract_closed_box(ball.as_box())

    def bounding_box(self) -> Box:
        if not self.boxes:
            raise ValueError("empty union has no bounding box")
        lo = tuple(min(b.lo[i] for b in self.boxes) for i in range(self.dim))
        hi = tuple(max(b.hi[i] for b in self.boxes) for i in range(self.dim))
        return Box(lo, hi)

    def volume(self) -> Fraction:
        """Exact Lebesgue volume of the union (coordinate compression)."""
        if not self.boxes:
            return Fraction(0)
        d = self.dim
        axes = []
        for i in range(d):
            coords = sorted({b.lo[i] for b in self.boxes} | {b.hi[i] for b in self.boxes})
            axes.append(coords)
        total = Fraction(0)
        cells = [(lo, hi) for lo, hi in _cell_iter(axes)]
        for lo, hi in cells:
            covered = any(
                all(bl <= cl and ch <= bh for bl, bh, cl, ch in zip(b.lo, b.hi, lo, hi))
                for b in self.boxes
            )
            if covered:
                v = Fraction(1)
                for cl, ch in zip(lo, hi):
                    v *= ch - cl
                total += v
        return total

    def clipped(self, box: Box) -> "BoxUnion":
        """Intersection with a closed box, as a union of open pieces."""
        pieces = []
        for p in self.boxes:
            lo = tuple(max(a, b) for a, b in zip(p.lo, box.lo))
            hi = tuple(min(a, b) for a, b in zip(p.hi, box.hi))
            if all(h > l for l, h in zip(lo, hi)):
                pieces.append(Box(lo, hi))
        return BoxUnion(pieces)

    def to_lines(self) -> list[str]:
        out = []
        for b in self.boxes:
            coords = []
            for l, h in zip(b.lo, b.hi):
                coords.append(repr(float(l)))
                coords.append(repr(float(h)))
            # interleaved as x1 y1 x2 y2 ... per the corner pair of each axis
            flat = [repr(float(v)) for v in b.lo] + [repr(float(v)) for v in b.hi]
            out.append("box " + " ".join(flat))
        return out

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "BoxUnion":
        boxes = []
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] != "box":
                raise ValueError(f"expected 'box' line, got {line!r}")
            vals = [as_fraction(float(v)) for v in parts[1:]]
            if len(vals) % 2 != 0:
                raise ValueError(f"odd coordinate count in {line!r}")
            d = len(vals) // 2
            boxes.append(Box(tuple(vals[:d]), tuple(vals[d:])))
        return cls(boxes)


def _cell_iter(axes: list[list[Fraction]]):
    d = len(axes)
    idx = [0] * d
    limits = [len(a) - 1 for a in axes]
    if any(l <= 0 for l in limits):
        return
    while True:
        lo = tuple(axes[i][idx[i]] for i in range(d))
        hi = tuple(axes[i][idx[i] + 1] for i in range(d))
        yield lo, hi
        j = d - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < limits[j]:
                break
            idx[j] = 0
            j -= 1
        if j < 0:
            return


def _merge_pair(a: Box, b: Box) -> Box | None:
    if a.contains_closed(b):
        return a
    if b.contains_closed(a):
        return b
    diff_axis = None
    for i in range(a.dim):
        if a.lo[i] != b.lo[i] or a.hi[i] != b.hi[i]:
            if diff_axis is not None:
                return None
            diff_axis = i
    if diff_axis is None:
        return a
    i = diff_axis
    # strict overlap required: touching open intervals do not merge
    if a.lo[i] < b.hi[i] and b.lo[i] < a.hi[i]:
        lo = list(a.lo)
        hi = list(a.hi)
        lo[i] = min(a.lo[i], b.lo[i])
        hi[i] = max(a.hi[i], b.hi[i])
        return Box(tuple(lo), tuple(hi))
    return None


def _dedupe(boxes: list[Box]) -> list[Box]:
    seen = set()
    out = []
    for b in boxes:
        key = (b.lo, b.hi)
        if key not in seen:
            seen.add(key)
            out.append(b)
    return out
