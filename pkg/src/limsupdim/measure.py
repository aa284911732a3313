"""Self-similar measures on R^d with certified-interval evaluation.

A measure is the fixed point mu = sum_i p_i * mu o f_i^{-1} of a finite
family of contracting homotheties f_i(x) = c_i x + t_i with a positive
probability vector.  Restricting the maps to homotheties (no rotations or
reflections) keeps every cylinder f_w([0,1]^d) an axis-aligned box, so the
inside / outside / straddling classification against a target box is exact
in rational arithmetic, and `eval_measure` returns a true enclosure
[lo, hi] of mu(target).

Lebesgue measure on [0,1]^d is provided as a built-in degenerate case (its
dyadic IFS) with an exact volume fast path.

Dimension caveat: `measure_dimension` evaluates the entropy/Lyapunov
quotient, which is justified under the open set condition; the caller must
assert that condition explicitly (``osc_asserted``) or the call refuses.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .geometry import Ball, Box, as_fraction, as_point
from .regions import BoxUnion

DEFAULT_TOL = 1e-9
DEFAULT_BUDGET = 10**7


@dataclass(frozen=True)
class SimilarityMap:
    """Contracting homothety x -> ratio * x + translation."""

    ratio: Fraction
    translation: tuple[Fraction, ...]

    def __post_init__(self):
        ratio = as_fraction(self.ratio)
        if not 0 < ratio < 1:
            raise ValueError(f"contraction ratio must be in (0,1), got {ratio}")
        object.__setattr__(self, "ratio", ratio)
        object.__setattr__(self, "translation", as_point(self.translation))

    @property
    def dim(self) -> int:
        return len(self.translation)

    def apply_point(self, p) -> tuple[Fraction, ...]:
        p = as_point(p)
        return tuple(self.ratio * x + t for x, t in zip(p, self.translation))


@dataclass(frozen=True)
class MeasureInterval:
    """Certified enclosure: the true mass lies in [lo, hi]."""

    lo: Fraction
    hi: Fraction
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        lo = as_fraction(self.lo)
        hi = as_fraction(self.hi)
        if lo > hi:
            raise ValueError("interval lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        x = as_fraction(x)
        return self.lo <= x <= self.hi


@dataclass
class LocalDimProfile:
    """log mu(B(x,r)) / log r sampled along a decreasing radius grid."""

    point: tuple[Fraction, ...]
    samples: list[tuple[float, float]]          # (r, ratio), defined samples only
    undefined_radii: list[float]
    liminf_est: float | None
    limsup_est: float | None


class SelfSimilarMeasure:
    """IFS of homotheties + probability vector, evaluating mu(B) to intervals."""

    def __init__(self, maps: Sequence[SimilarityMap], probs: Sequence,
                 osc_asserted: bool = False, is_lebesgue: bool = False,
                 name: str | None = None):
        maps = list(maps)
        if len(maps) < 2:
            raise ValueError("need at least 2 maps")
        d = maps[0].dim
        if any(m.dim != d for m in maps):
            raise ValueError("all maps must share one dimension")
        probs = [as_fraction(p) for p in probs]
        if len(probs) != len(maps):
            raise ValueError("probs length must match maps")
        if any(p <= 0 for p in probs):
            raise ValueError("probabilities must be strictly positive")
        total = sum(probs)
        if abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {float(total)}")
        if total != 1:
            probs = [p / total for p in probs]  # exact renormalisation
        for m in maps:
            if any(t < 0 for t in m.translation) or any(
                m.ratio + t > 1 for t in m.translation
            ):
                raise ValueError(
                    "maps must send [0,1]^d into itself (normalise the IFS first)"
                )
        self.maps = maps
        self.probs = probs
        self.osc_asserted = bool(osc_asserted)
        self.is_lebesgue = bool(is_lebesgue)
        self.name = name
        self._dim = d
        self._cache: dict = {}

    # -- constructors ---------------------------------------------------

    @classmethod
    def lebesgue(cls, d: int) -> "SelfSimilarMeasure":
        """Lebesgue measure on [0,1]^d via its dyadic IFS, with exact fast path."""
        half = Fraction(1, 2)
        maps = []
        for mask in range(2**d):
            t = tuple(half if (mask >> j) & 1 else Fraction(0) for j in range(d))
            maps.append(SimilarityMap(half, t))
        p = Fraction(1, 2**d)
        return cls(maps, [p] * len(maps), osc_asserted=True, is_lebesgue=True,
                   name=f"lebesgue {d}")

    @classmethod
    def cantor(cls, probs=(Fraction(1, 2), Fraction(1, 2))) -> "SelfSimilarMeasure":
        """Middle-third Cantor measure on [0,1] with the given weights."""
        third = Fraction(1, 3)
        maps = [SimilarityMap(third, (Fraction(0),)),
                SimilarityMap(third, (Fraction(2, 3),))]
        return cls(maps, probs, osc_asserted=True, name="cantor")

    # -- basic properties -----------------------------------------------

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def num_maps(self) -> int:
        return len(self.maps)

    def support_box(self) -> Box:
        one = Fraction(1)
        return Box((Fraction(0),) * self._dim, (one,) * self._dim)

    def __repr__(self):
        label = self.name or f"{len(self.maps)} maps"
        return f"SelfSimilarMeasure({label}, d={self._dim})"

    # -- serialization ---------------------------------------------------

    def to_text(self) -> str:
        if self.is_lebesgue:
            return f"lebesgue {self._dim}\n"
        lines = [f"{len(self.maps)} {self._dim}"]
        for m, p in zip(self.maps, self.probs):
            coords = " ".join(repr(float(t)) for t in m.translation)
            lines.append(f"{repr(float(m.ratio))} {coords} {repr(float(p))}")
        lines.append(f"osc {1 if self.osc_asserted else 0}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SelfSimilarMeasure":
        lines = [l.strip() for l in text.splitlines() if l.strip() and not l.startswith("#")]
        if not lines:
            raise ValueError("empty measure spec")
        head = lines[0].split()
        if head[0] == "lebesgue":
            return cls.lebesgue(int(head[1]))
        m, d = int(head[0]), int(head[1])
        maps, probs = [], []
        for line in lines[1:1 + m]:
            parts = [as_fraction(float(v)) for v in line.split()]
            if len(parts) != d + 2:
                raise ValueError(f"expected ratio, {d} coords, prob: {line!r}")
            maps.append(SimilarityMap(parts[0], tuple(parts[1:1 + d])))
            probs.append(parts[-1])
        osc = False
        for line in lines[1 + m:]:
            parts = line.split()
            if parts[0] == "osc":
                osc = parts[1] == "1"
        return cls(maps, probs, osc_asserted=osc)

    # -- evaluation -------------------------------------------------------

    def _classify(self, lo, hi, target):
        """-1 outside, +1 inside, 0 straddling, for a closed cylinder box."""
        if isinstance(target, _ClosedBoxTarget):
            box = target.box
            inside = all(bl <= l and h <= bh
                         for l, h, bl, bh in zip(lo, hi, box.lo, box.hi))
            if inside:
                return 1
            overlap = all(l <= bh and bl <= h
                          for l, h, bl, bh in zip(lo, hi, box.lo, box.hi))
            return 0 if overlap else -1
        # open box-union target
        pieces = target.boxes
        for p in pieces:
            if all(pl < l and h < ph for l, h, pl, ph in zip(lo, hi, p.lo, p.hi)):
                return 1
        for p in pieces:
            if all(l < ph and pl < h for l, h, pl, ph in zip(lo, hi, p.lo, p.hi)):
                return 0
        return -1

    def eval_measure(self, target, tol: float = DEFAULT_TOL,
                     budget: int = DEFAULT_BUDGET) -> MeasureInterval:
        """Certified interval around mu(target).

        target may be a Ball, a closed Box, or a BoxUnion (treated as open).
        Breadth-first cylinder refinement: classify each cylinder as inside,
        outside or straddling, refine straddlers until the straddling mass is
        at most tol.  On budget exhaustion the (still valid) wider interval
        is returned with a ``budget-exceeded`` flag.
        """
        target = _normalize_target(target, self._dim)
        key = (target.cache_key(), as_fraction(tol))
        hit = self._cache.get(key)
        if hit is not None:
            return hit

        if self.is_lebesgue:
            result = self._lebesgue_eval(target)
            self._cache[key] = result
            return result

        tol = as_fraction(tol)
        if tol <= 0:
            raise ValueError("tol must be positive")
        zero = Fraction(0)
        one = Fraction(1)
        inside_mass = zero
        straddle_mass = one
        # (scale, offset tuple, weight); cylinder box = prod [off, off+scale]
        queue = deque([(one, (zero,) * self._dim, one)])
        nodes = 0
        flags: list[str] = []
        while queue and straddle_mass > tol:
            scale, off, weight = queue.popleft()
            straddle_mass -= weight
            hi = tuple(o + scale for o in off)
            cls_ = self._classify(off, hi, target)
            if cls_ == 1:
                inside_mass += weight
                continue
            if cls_ == -1:
                continue
            nodes += len(self.maps)
            if nodes > budget:
                straddle_mass += weight
                queue.appendleft((scale, off, weight))
                flags.append("budget-exceeded")
                break
            for m, p in zip(self.maps, self.probs):
                child_scale = scale * m.ratio
                child_off = tuple(scale * t + o for t, o in zip(m.translation, off))
                child_weight = weight * p
                straddle_mass += child_weight
                queue.append((child_scale, child_off, child_weight))
        result = MeasureInterval(inside_mass, inside_mass + straddle_mass,
                                 tuple(flags))
        self._cache[key] = result
        return result

    def _lebesgue_eval(self, target) -> MeasureInterval:
        unit = self.support_box()
        if isinstance(target, _ClosedBoxTarget):
            inter = target.box.intersection(unit)
            v = inter.volume() if inter is not None else Fraction(0)
            return MeasureInterval(v, v)
        v = target.clipped(unit).volume()
        return MeasureInterval(v, v)


class _ClosedBoxTarget:
    __slots__ = ("box",)

    def __init__(self, box: Box):
        self.box = box

    def cache_key(self):
        return ("closed", self.box.lo, self.box.hi)


def _normalize_target(target, d: int):
    if isinstance(target, Ball):
        if target.dim != d:
            raise ValueError("ball dimension does not match measure dimension")
        return _ClosedBoxTarget(target.as_box())
    if isinstance(target, Box):
        if target.dim != d:
            raise ValueError("box dimension does not match measure dimension")
        return _ClosedBoxTarget(target)
    if isinstance(target, BoxUnion):
        if target.is_empty():
            return _EmptyTarget()
        if target.dim != d:
            raise ValueError("region dimension does not match measure dimension")
        return target
    raise TypeError(f"cannot evaluate measure of {type(target).__name__}")


class _EmptyTarget:
    boxes: list = []

    def cache_key(self):
        return ("empty",)

    def clipped(self, box):
        return BoxUnion([])


# BoxUnion doubles as its own normalized target; give it the cache hook.
def _boxunion_cache_key(self):
    return ("open",) + tuple((b.lo, b.hi) for b in self.boxes)


BoxUnion.cache_key = _boxunion_cache_key


def eval_measure(mu: SelfSimilarMeasure, target, tol: float = DEFAULT_TOL,
                 budget: int = DEFAULT_BUDGET) -> MeasureInterval:
    """Functional wrapper around :meth:`SelfSimilarMeasure.eval_measure`."""
    return mu.eval_measure(target, tol=tol, budget=budget)


def local_dimension(mu: SelfSimilarMeasure, x, r_grid: Sequence,
                    tol: float = DEFAULT_TOL) -> LocalDimProfile:
    """Sample log mu(B(x,r)) / log r along a decreasing grid of radii.

    Samples whose certified interval contains 0 are undefined and excluded;
    liminf/limsup estimates are the min/max over the tail half of the
    remaining samples (None when everything is undefined).
    """
    x = as_point(x)
    radii = [as_fraction(r) for r in r_grid]
    if len(radii) < 3:
        raise ValueError("need at least 3 radii")
    if any(r <= 0 or r >= 1 for r in radii):
        raise ValueError("radii must lie in (0, 1)")
    if any(a <= b for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    samples: list[tuple[float, float]] = []
    undefined: list[float] = []
    for r in radii:
        inter = mu.eval_measure(Ball(x, r), tol=tol)
        if inter.lo == 0:
            undefined.append(float(r))
            continue
        ratio = math.log(float(inter.midpoint)) / math.log(float(r))
        samples.append((float(r), ratio))
    if samples:
        tail = samples[len(samples) // 2:]
        ratios = [t[1] for t in tail]
        liminf_est, limsup_est = min(ratios), max(ratios)
    else:
        liminf_est = limsup_est = None
    return LocalDimProfile(x, samples, undefined, liminf_est, limsup_est)


def measure_dimension(mu: SelfSimilarMeasure) -> float:
    """Entropy/Lyapunov dimension (sum p log p) / (sum p log c).

    Valid under the open set condition only; refuses unless the measure was
    built with ``osc_asserted=True``.  The built-in Lebesgue measure returns
    the ambient dimension d.
    """
    if mu.is_lebesgue:
        return float(mu.dim)
    if not mu.osc_asserted:
        raise ValueError(
            "measure_dimension: the entropy/Lyapunov quotient is only "
            "justified under the open set condition; construct the measure "
            "with osc_asserted=True to assert it"
        )
    num = sum(float(p) * math.log(float(p)) for p in mu.probs)
    den = sum(float(p) * math.log(float(m.ratio)) for p, m in zip(mu.probs, mu.maps))
    return num / den


def attractor_cylinders(mu: SelfSimilarMeasure, depth: int,
                        budget: int = 10**6) -> list[tuple[Box, Fraction]]:
    """All m^depth cylinders f_w([0,1]^d) with their weights p_w.

    Weights sum to 1 exactly.  Raises when m^depth exceeds the budget, with
    the largest feasible depth in the message.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    m = mu.num_maps
    if m**depth > budget:
        ok = 0
        while m ** (ok + 1) <= budget:
            ok += 1
        raise ValueError(
            f"{m}^{depth} cylinders exceed budget {budget}; try depth <= {ok}"
        )
    zero = Fraction(0)
    one = Fraction(1)
    level = [(one, (zero,) * mu.dim, one)]
    for _ in range(depth):
        nxt = []
        for scale, off, weight in level:
            for mp, p in zip(mu.maps, mu.probs):
                nxt.append(
                    (scale * mp.ratio,
                     tuple(scale * t + o for t, o in zip(mp.translation, off)),
                     weight * p)
                )
        level = nxt
    out = []
    for scale, off, weight in level:
        box = Box(off, tuple(o + scale for o in off))
        out.append((box, weight))
    return out


def attractor_diameter(mu: SelfSimilarMeasure, depth: int = 10) -> tuple[Fraction, Fraction]:
    """Certified (lower, upper) bounds on the sup-norm diameter of the attractor.

    Upper bound: diameter of the depth-k cylinder cover.  Lower bound:
    diameter of the set of depth-k images of the map fixed points (all lie
    on the attractor).
    """
    cylinders = attractor_cylinders(mu, min(depth, 12), budget=10**6)
    d = mu.dim
    lo_corner = tuple(min(b.lo[i] for b, _ in cylinders) for i in range(d))
    hi_corner = tuple(max(b.hi[i] for b, _ in cylinders) for i in range(d))
    upper = max(h - l for l, h in zip(lo_corner, hi_corner))

    # fixed point of x -> cx + t is t / (1 - c)
    points = [tuple(t / (1 - m.ratio) for t in m.translation) for m in mu.maps]
    lo_p = tuple(min(p[i] for p in points) for i in range(d))
    hi_p = tuple(max(p[i] for p in points) for i in range(d))
    lower = max(h - l for l, h in zip(lo_p, hi_p))
    return lower, upper


def point_in_support(mu: SelfSimilarMeasure, x, depth: int = 8) -> bool:
    """Whether x lies in some depth-`depth` cylinder (cylinder-precision test)."""
    x = as_point(x)
    if len(x) != mu.dim:
        raise ValueError("point dimension mismatch")
    zero = Fraction(0)
    one = Fraction(1)
    level = [(one, (zero,) * mu.dim)]
    for _ in range(depth):
        nxt = []
        for scale, off in level:
            for mp in mu.maps:
                c_scale = scale * mp.ratio
                c_off = tuple(scale * t + o for t, o in zip(mp.translation, off))
                if all(o <= xi <= o + c_scale for o, xi in zip(c_off, x)):
                    nxt.append((c_scale, c_off))
        if not nxt:
            return False
        level = nxt
    return True
