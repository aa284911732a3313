"""Ordered, indexed ball sequences with scale buckets.

The scale bucket T_k collects the indices of balls whose radius lies in
(2^(-k-1), 2^(-k)]; balls with radius above 1 land in the flagged bucket
k = -1.  Buckets are computed exactly from the rational radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .geometry import Ball, Box, as_fraction, contract_ball, scale_index
from .regions import BoxUnion


@dataclass
class BallSequence:
    """Ordered family of balls; index = position in the sequence."""

    balls: list[Ball]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.balls = list(self.balls)
        if self.balls:
            d = self.balls[0].dim
            for i, b in enumerate(self.balls):
                if b.dim != d:
                    raise ValueError(
                        f"ball {i} has dimension {b.dim}, expected {d}"
                    )
        self._buckets: dict[int, list[int]] | None = None
        self._radii: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.balls)

    def __iter__(self) -> Iterator[Ball]:
        return iter(self.balls)

    def __getitem__(self, i: int) -> Ball:
        return self.balls[i]

    @property
    def dim(self) -> int:
        if not self.balls:
            raise ValueError("empty sequence has no dimension")
        return self.balls[0].dim

    @property
    def scale_buckets(self) -> dict[int, list[int]]:
        """Map k -> indices of balls with radius in (2^(-k-1), 2^(-k)]."""
        if self._buckets is None:
            buckets: dict[int, list[int]] = {}
            for i, b in enumerate(self.balls):
                buckets.setdefault(scale_index(b), []).append(i)
            self._buckets = buckets
        return self._buckets

    def radii_array(self) -> np.ndarray:
        if self._radii is None:
            self._radii = np.array([float(b.radius) for b in self.balls])
        return self._radii

    def centers_array(self) -> np.ndarray:
        return np.array([[float(c) for c in b.center] for b in self.balls])

    def subsequence(self, indices: Sequence[int], metadata: dict | None = None
                    ) -> "BallSequence":
        indices = list(indices)
        if any(a >= b for a, b in zip(indices, indices[1:])):
            raise ValueError("subsequence indices must be strictly increasing")
        meta = dict(self.metadata)
        meta.update(metadata or {})
        meta["parent_indices"] = indices
        return BallSequence([self.balls[i] for i in indices], meta)

    def tail_start_for_scale(self, k: int) -> int | None:
        """Smallest g with radius <= 2^(-k) for every index >= g, or None."""
        bound = Fraction(1, 2**k) if k >= 0 else Fraction(2**(-k))
        g = len(self.balls)
        for i in range(len(self.balls) - 1, -1, -1):
            if self.balls[i].radius > bound:
                return g if g < len(self.balls) else None
            g = i
        return g

    def bounding_box(self, pad=1) -> Box:
        """Open box strictly containing every ball, padded on all sides."""
        if not self.balls:
            raise ValueError("empty sequence has no bounding box")
        pad = as_fraction(pad)
        d = self.dim
        lo = [min(b.center[i] - b.radius for b in self.balls) - pad for i in range(d)]
        hi = [max(b.center[i] + b.radius for b in self.balls) + pad for i in range(d)]
        return Box(tuple(lo), tuple(hi))

    def bounding_region(self, pad=1) -> BoxUnion:
        box = self.bounding_box(pad)
        return BoxUnion.from_box(box.lo, box.hi)

    def validate(self) -> list[str]:
        """Diagnostics for the sequence invariants (non-fatal)."""
        issues = []
        oversized = sum(1 for b in self.balls if b.radius > 1)
        if oversized:
            issues.append(f"{oversized} ball(s) with radius > 1 (flagged bucket k=-1)")
        if len(self.balls) >= 2:
            rmin = min(b.radius for b in self.balls)
            if rmin >= self.balls[0].radius:
                issues.append("min radius over first n does not decrease")
        return issues

    def contracted(self, delta) -> "BallSequence":
        """Apply radius -> radius**delta ballwise, recording the mode."""
        delta = as_fraction(delta)
        balls = [contract_ball(b, delta) for b in self.balls]
        meta = dict(self.metadata)
        meta["contracted_delta"] = float(delta)
        meta["contract_exact"] = bool(delta.denominator == 1 and delta >= 0)
        if delta < 1:
            meta["contract_expansion"] = True
        return BallSequence(balls, meta)

    # -- plain-text serialization ----------------------------------------
    # one ball per line: d, center coordinates, radius (decimals)

    def to_text(self) -> str:
        lines = []
        for b in self.balls:
            coords = " ".join(repr(float(c)) for c in b.center)
            lines.append(f"{b.dim} {coords} {repr(float(b.radius))}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, metadata: dict | None = None) -> "BallSequence":
        balls = []
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            d = int(parts[0])
            if len(parts) != d + 2:
                raise ValueError(f"line {ln}: expected d, {d} coords, radius")
            center = tuple(as_fraction(float(v)) for v in parts[1:1 + d])
            radius = as_fraction(float(parts[-1]))
            balls.append(Ball(center, radius))
        return cls(balls, metadata or {})
