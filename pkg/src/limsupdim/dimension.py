"""Hausdorff content estimation and critical-exponent dimension machinery.

* `hausdorff_content_upper`: optimal cover of a box union by closed dyadic
  cubes up to a refinement depth (optimal substructure over the laminar
  dyadic family, so the recursion value IS the dyadic-cover optimum).
  Restricting covers to dyadic cubes loses at most a bounded alignment
  factor against arbitrary ball covers; the factor is recorded.
* `g_tau` / `essential_rect_content`: the closed-form content exponent of an
  anisotropic rectangle, max_k { s*tau_k - sum_{i<=k}(tau_k - tau_i) }.
* `s0_solver`, `predict_shrunk_ball_dim`, `predict_rect_dim`: closed-form
  dimension predictions.
* `natural_cover_critical_exponent`: the tail-sum device; the estimate is
  the exponent where the tail cover-cost sums cross 1.
* `content_equivalence_check`: numerical two-sided bands between plain
  content and its restriction to attractor cylinder covers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .geometry import (
    Ball,
    Box,
    DyadicCube,
    Rectangle,
    as_fraction,
    as_point,
    closed_dyadic_cover_ranges,
)
from .measure import SelfSimilarMeasure, attractor_cylinders
from .regions import BoxUnion
from .sequences import BallSequence

ALIGNMENT_FACTOR_EXP = 2          # dyadic covers lose at most 4^s = (2^s)^2


@dataclass
class ContentEstimate:
    s: float
    t: float                       # scale bound, math.inf for H^s_inf
    value_upper: float
    value_lower: float | None = None
    cover: list[DyadicCube] = field(default_factory=list)
    depth: int = 0
    flags: list[str] = field(default_factory=list)
    alignment_factor: float = 4.0  # value_upper / 4^s lower-bounds arbitrary covers


@dataclass
class DimensionReport:
    prediction: float | None
    prediction_formula: str
    estimate: float
    tolerance: float
    Q: int
    n0: int
    grid: list[tuple[float, float]]          # (s, tail sum)
    flags: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["s_grid,tail_sum,prediction,estimate,tolerance"]
        pred = "" if self.prediction is None else repr(self.prediction)
        for s, t in self.grid:
            lines.append(f"{s!r},{t!r},{pred},{self.estimate!r},{self.tolerance!r}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# dyadic content
# ---------------------------------------------------------------------------

def _as_region(region) -> list[Box]:
    if isinstance(region, Ball):
        return [region.as_box()]
    if isinstance(region, Rectangle):
        return [region.as_box()]
    if isinstance(region, Box):
        return [region]
    if isinstance(region, BoxUnion):
        return list(region.boxes)
    if isinstance(region, (list, tuple)):
        out = []
        for r in region:
            out.extend(_as_region(r))
        return out
    raise TypeError(f"cannot interpret {type(region).__name__} as a region")


def hausdorff_content_upper(region, s: float, t: float = math.inf,
                            depth: int = 12,
                            collect_cover: bool = False) -> ContentEstimate:
    """Upper bound for the s-content at scale t via optimal dyadic covers.

    A generation-k cube meeting the region is either kept whole (cost
    side^s, allowed when side <= t) or split into children, whichever is
    cheaper; the recursion bottoms out at ``depth`` extra generations.
    Boxes are treated as closed (same content for s > 0).
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    boxes = [b for b in _as_region(region) if not b.is_empty()]
    flags: list[str] = []
    if not boxes:
        return ContentEstimate(float(s), float(t), 0.0, depth=depth)
    d = boxes[0].dim
    lo = tuple(min(b.lo[i] for b in boxes) for i in range(d))
    hi = tuple(max(b.hi[i] for b in boxes) for i in range(d))
    bbox = Box(lo, hi)
    s_f = float(s)
    t_frac = None if math.isinf(t) else as_fraction(t)
    max_side_used = Fraction(0)

    def region_relation(cube_lo, cube_hi) -> int:
        """1 cube inside region, -1 disjoint, 0 straddling."""
        covered = False
        touching = False
        for b in boxes:
            inside = all(bl <= cl and ch <= bh for bl, bh, cl, ch in
                         zip(b.lo, b.hi, cube_lo, cube_hi))
            if inside:
                covered = True
                touching = True
                break
            if all(cl <= bh and bl <= ch for bl, bh, cl, ch in
                   zip(b.lo, b.hi, cube_lo, cube_hi)):
                touching = True
        if covered:
            return 1
        return 0 if touching else -1

    chosen: list[DyadicCube] = []

    def whole_cost(side: Fraction, levels_left: int) -> tuple[float, int]:
        """Cheapest full-subdivision cost for a cube entirely inside the region.

        Splitting a full cube by j generations costs 2^(dj) * (side/2^j)^s,
        monotone in j: minimal at j=0 for s <= d and at the deepest level
        for s > d, subject to the scale bound t.
        """
        j_min = 0
        if t_frac is not None:
            while side / (2**j_min) > t_frac and j_min < levels_left:
                j_min += 1
        pick = j_min if s_f <= d else max(levels_left, j_min)
        return (2.0 ** (d * pick)) * float(side / (2**pick)) ** s_f, pick

    def visit(k: int, idx: tuple[int, ...], levels_left: int,
              record: bool) -> float:
        nonlocal max_side_used
        side = Fraction(1, 2**k) if k >= 0 else Fraction(2**(-k))
        cube_lo = tuple(i * side for i in idx)
        cube_hi = tuple(l + side for l in cube_lo)
        rel = region_relation(cube_lo, cube_hi)
        if rel == -1:
            return 0.0
        keep_allowed = t_frac is None or side <= t_frac
        keep_cost = float(side) ** s_f if keep_allowed else math.inf
        if rel == 1:
            cost, down = whole_cost(side, levels_left)
            if record:
                if down == 0:
                    chosen.append(DyadicCube(k, idx))
                _note_side(side / (2**down))
            return cost
        if levels_left == 0:
            if record:
                _note_side(side)
                if k >= 0:
                    chosen.append(DyadicCube(k, idx))
            if not keep_allowed:
                flags.append("scale-bound-unmet-at-depth")
                return float(side) ** s_f
            return keep_cost
        split_cost = 0.0
        for mask in range(2**d):
            child = tuple(2 * idx[j] + ((mask >> j) & 1) for j in range(d))
            split_cost += visit(k + 1, child, levels_left - 1, False)
            if split_cost >= keep_cost:
                break
        if keep_cost <= split_cost:
            if record:
                _note_side(side)
                if k >= 0:
                    chosen.append(DyadicCube(k, idx))
            return keep_cost
        if record:
            for mask in range(2**d):
                child = tuple(2 * idx[j] + ((mask >> j) & 1) for j in range(d))
                visit(k + 1, child, levels_left - 1, True)
        return split_cost

    def _note_side(side: Fraction) -> None:
        nonlocal max_side_used
        if side > max_side_used:
            max_side_used = side

    ranges = closed_dyadic_cover_ranges(bbox, 0)
    total = 0.0
    root_indices = _product_ranges(ranges)
    for idx in root_indices:
        total += visit(0, tuple(idx), depth, collect_cover)
    if t_frac is not None and max_side_used > t_frac:
        flags.append("depth-budget: pieces above the scale bound remain")
    return ContentEstimate(
        s=float(s), t=float(t), value_upper=total,
        cover=chosen,
        depth=depth, flags=sorted(set(flags)),
        alignment_factor=float(2**ALIGNMENT_FACTOR_EXP) ** s_f if s_f > 0 else 1.0,
    )


def _product_ranges(ranges):
    idx = [r.start for r in ranges]
    d = len(ranges)
    while True:
        yield tuple(idx)
        j = d - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < ranges[j].stop:
                break
            idx[j] = ranges[j].start
            j -= 1
        if j < 0:
            return


# ---------------------------------------------------------------------------
# rectangle content exponent
# ---------------------------------------------------------------------------

def g_tau(s, tau) -> float:
    """Rectangle content exponent: max_k { s*tau_k - sum_{i<=k}(tau_k - tau_i) }."""
    tau = [float(t) for t in as_point(tau)]
    if tau[0] < 1 or any(a > b for a, b in zip(tau, tau[1:])):
        raise ValueError("tau must be non-decreasing with tau[0] >= 1")
    s = float(s)
    best = -math.inf
    for k in range(1, len(tau) + 1):
        val = s * tau[k - 1] - sum(tau[k - 1] - tau[i] for i in range(k))
        best = max(best, val)
    return best


def essential_rect_content(tau, diam, s) -> float:
    """Content of the rectangle attached to a ball of diameter `diam`: diam^g_tau(s)."""
    diam = float(diam)
    if not 0 < diam < 1:
        raise ValueError("diameter must lie in (0, 1)")
    return diam ** g_tau(s, tau)


def s0_solver(tau, target_dim) -> float:
    """Smallest s with g_tau(s) >= target_dim.

    g_tau is a max of increasing affine branches, so the answer is the
    smallest of the per-branch crossings.
    """
    tau = [float(t) for t in as_point(tau)]
    if tau[0] < 1 or any(a > b for a, b in zip(tau, tau[1:])):
        raise ValueError("tau must be non-decreasing with tau[0] >= 1")
    target = float(target_dim)
    if target <= 0:
        raise ValueError("target dimension must be positive")
    best = math.inf
    for k in range(1, len(tau) + 1):
        offset = sum(tau[k - 1] - tau[i] for i in range(k))
        best = min(best, (target + offset) / tau[k - 1])
    return best


def predict_shrunk_ball_dim(dim_mu, delta) -> float:
    """dim(mu) / delta: the limsup dimension of delta-contracted balls."""
    delta = float(delta)
    if delta < 1:
        raise ValueError("delta must be >= 1")
    return float(dim_mu) / delta


def predict_rect_dim(dim_mu, tau) -> float:
    """min_i (dim(mu) + sum_{j<=i}(tau_i - tau_j)) / tau_i."""
    tau = [float(t) for t in as_point(tau)]
    if tau[0] < 1 or any(a > b for a, b in zip(tau, tau[1:])):
        raise ValueError("tau must be non-decreasing with tau[0] >= 1")
    dim_mu = float(dim_mu)
    return min(
        (dim_mu + sum(tau[i - 1] - tau[j] for j in range(i))) / tau[i - 1]
        for i in range(1, len(tau) + 1)
    )


# ---------------------------------------------------------------------------
# natural-cover critical exponent
# ---------------------------------------------------------------------------

@dataclass
class CoverCostTable:
    """Per-set cover-cost inputs: diameters with multiplicities and masses."""

    diams: np.ndarray
    counts: np.ndarray
    masses: np.ndarray | None = None

    def __post_init__(self):
        self.diams = np.asarray(self.diams, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.masses is not None:
            self.masses = np.asarray(self.masses, dtype=float)
        if self.diams.shape != self.counts.shape:
            raise ValueError("diams and counts must have matching shapes")

    @classmethod
    def from_sequence(cls, seq: BallSequence,
                      masses: Sequence[float] | None = None) -> "CoverCostTable":
        diams = 2.0 * seq.radii_array()
        counts = np.ones_like(diams)
        m = np.asarray(masses, dtype=float) if masses is not None else None
        return cls(diams, counts, m)

    @property
    def total(self) -> int:
        return int(round(self.counts.sum()))


def natural_cover_critical_exponent(
    sets, s_grid: Sequence[float] | None = None, mode: str = "ball",
    delta: float = 1.0, tau=None, n0: int | None = None,
    prediction: float | None = None, prediction_formula: str = "",
    s_ref: float | None = None, mass_constant: float = 2.0,
    bisect_tol: float = 1e-3,
) -> DimensionReport:
    """Critical exponent of the tail cover-cost sums.

    Cost of one set at exponent s:

    * mode="ball": |B^delta|^s with |B^delta| = 2 r^delta;
    * mode="rect": |B|^g_tau(s);
    * mode="measure": mass_constant * mu(B) * |B|^(s - s_ref) for s >= s_ref
      (the weak-redundancy summation bound; requires masses and s_ref).

    The estimate is the s where the tail sum (sets of index >= n0, default
    half of the sequence) crosses 1, grid-bracketed then bisected.
    """
    if isinstance(sets, BallSequence):
        table = CoverCostTable.from_sequence(sets)
    elif isinstance(sets, CoverCostTable):
        table = sets
    else:
        raise TypeError("sets must be a BallSequence or CoverCostTable")
    total = table.total
    flags: list[str] = []
    if total < 2:
        flags.append("degenerate-input")
    elif table.diams.size and float(table.diams.min()) == float(table.diams.max()):
        flags.append("degenerate-constant-diameter")
    if n0 is None:
        n0 = total // 2

    cum = np.cumsum(table.counts)
    start = int(np.searchsorted(cum, n0, side="left"))
    if start >= table.diams.size:
        start = max(table.diams.size - 1, 0)
    partial = float(cum[start] - n0) if table.diams.size else 0.0

    if mode == "rect":
        if tau is None:
            raise ValueError("mode='rect' needs tau")
    elif mode == "measure":
        if table.masses is None or s_ref is None:
            raise ValueError("mode='measure' needs masses and s_ref")
    elif mode != "ball":
        raise ValueError(f"unknown mode {mode!r}")

    def tail_sum(s: float) -> float:
        if not table.diams.size:
            return 0.0
        if mode == "ball":
            base = 2.0 * (table.diams / 2.0) ** float(delta)
            w = base ** s
        elif mode == "rect":
            w = table.diams ** g_tau(s, tau)
        else:
            w = mass_constant * table.masses * table.diams ** (s - s_ref)
        full = float((table.counts[start + 1:] * w[start + 1:]).sum())
        return full + partial * float(w[start])

    if s_grid is None:
        d_guess = 1 if mode != "rect" else len(as_point(tau))
        s_grid = [i / 20 for i in range(1, 20 * (d_guess + 2))]
    s_grid = sorted(float(s) for s in s_grid)
    rows = [(s, tail_sum(s)) for s in s_grid]

    sums = [t for _, t in rows]
    if any(a < b - 1e-12 for a, b in zip(sums, sums[1:])):
        flags.append("non-monotone-tail-sums")

    lo_s, hi_s = None, None
    for (s1, t1), (s2, t2) in zip(rows, rows[1:]):
        if t1 > 1.0 >= t2:
            lo_s, hi_s = s1, s2
            break
    if lo_s is None:
        if sums and sums[0] <= 1.0:
            estimate = s_grid[0]
            flags.append("crossing-below-grid")
        else:
            estimate = s_grid[-1]
            flags.append("crossing-above-grid")
    else:
        while hi_s - lo_s > bisect_tol:
            mid = 0.5 * (lo_s + hi_s)
            if tail_sum(mid) > 1.0:
                lo_s = mid
            else:
                hi_s = mid
        estimate = 0.5 * (lo_s + hi_s)

    return DimensionReport(
        prediction=prediction,
        prediction_formula=prediction_formula,
        estimate=estimate,
        tolerance=bisect_tol,
        Q=total,
        n0=n0,
        grid=rows,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# content equivalence bands
# ---------------------------------------------------------------------------

@dataclass
class ContentEquivalenceReport:
    rows: list[tuple[int, int, float]]        # (depth, cylinders used, value)
    ratio_band: tuple[float, float] | None    # vs |B|^s for ball regions
    vanishing: bool
    s: float


def content_equivalence_check(mu: SelfSimilarMeasure, region, s: float,
                              depths: Sequence[int] = (2, 3, 4, 5, 6),
                              ) -> ContentEquivalenceReport:
    """Content of region restricted to cylinder covers, across depths.

    At each depth the cylinders meeting the region form a closed cover of
    region intersected with the attractor; the recorded value is the cheaper
    of their summed cost and the single-piece cover.  For a ball region the
    ratio band value / |B|^s across depths is reported; for s above the
    measure dimension the values must vanish with depth.
    """
    boxes = _as_region(region)
    s_f = float(s)
    is_ball = isinstance(region, Ball)
    diam = float(region.diameter) if is_ball else None
    rows = []
    for depth in depths:
        cylinders = attractor_cylinders(mu, depth, budget=10**6)
        used = 0
        cost = 0.0
        for cyl, _w in cylinders:
            if any(cyl.intersects_closed(b) for b in boxes):
                used += 1
                side = max(float(h - l) for l, h in zip(cyl.lo, cyl.hi))
                cost += side ** s_f
        whole = _single_cover_cost(boxes, s_f)
        rows.append((depth, used, min(cost, whole)))
    band = None
    if is_ball and diam and diam > 0:
        ratios = [v / diam**s_f for _, _, v in rows]
        band = (min(ratios), max(ratios))
    values = [v for _, _, v in rows]
    vanishing = all(a >= b for a, b in zip(values, values[1:])) and (
        values[-1] < values[0] or values[0] == 0.0
    )
    return ContentEquivalenceReport(rows, band, vanishing, s_f)


def _single_cover_cost(boxes: list[Box], s: float) -> float:
    lo = tuple(min(b.lo[i] for b in boxes) for i in range(boxes[0].dim))
    hi = tuple(max(b.hi[i] for b in boxes) for i in range(boxes[0].dim))
    side = max(float(h - l) for l, h in zip(lo, hi))
    return side**s
