"""The covering engine.

Greedy disjoint coverings of open sets, Besicovitch-style partitions of ball
families, weak-redundancy profiling of scale buckets, empirical
asymptotic-covering tables, and quasi-independence (Borel-Cantelli style)
sum checks.

All selection decisions are made with exact rational arithmetic; the
certified measure intervals of :mod:`limsupdim.measure` supply the masses.
Each engine is deterministic for a fixed input order.
"""

from __future__ import annotations

import heapq
import math
import warnings
from bisect import bisect_left, insort
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .geometry import Ball, Box, as_fraction, balls_disjoint, scale_ball
from .measure import MeasureInterval, SelfSimilarMeasure
from .regions import BoxUnion
from .sequences import BallSequence


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------

@dataclass
class CoverFamily:
    """Pairwise-disjoint balls of index >= min_index inside an open set."""

    indices: list[int]
    omega: BoxUnion
    covered_fraction: float
    min_index: int
    covered_mass: tuple[float, float] = (0.0, 0.0)
    omega_mass: tuple[float, float] = (0.0, 0.0)
    rounds_used: int = 0
    per_round: list[int] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["index"]
        lines += [str(i) for i in self.indices]
        return "\n".join(lines) + "\n"


@dataclass
class RedundancyReport:
    """Per-scale family counts J_k and the tail slope of log2(J_k)/k."""

    per_scale: list[tuple[int, int, int]]          # (k, |T_k|, J_k)
    slope_tail: float | None
    families: dict[int, list[list[int]]]           # k -> families of indices
    k_min: int
    flags: list[str] = field(default_factory=list)

    def j_values(self) -> dict[int, int]:
        return {k: j for k, _, j in self.per_scale}

    def to_csv(self) -> str:
        lines = ["k,count,J_k,slope"]
        for k, count, j in self.per_scale:
            slope = math.log2(j) / k if k >= 1 else ""
            lines.append(f"{k},{count},{j},{slope}")
        return "\n".join(lines) + "\n"


@dataclass
class BesicovitchPartition:
    """Besicovitch selection + partition into dilation-disjoint families."""

    families: list[list[int]]          # indices into the input family
    selected: list[int]
    v: Fraction
    uncovered_centers: list[int]
    flags: list[str] = field(default_factory=list)

    @property
    def family_count(self) -> int:
        return len(self.families)


@dataclass
class ACRow:
    omega_index: int
    g: int
    fraction: float
    selected: int
    flags: list[str] = field(default_factory=list)


@dataclass
class ACTable:
    """Empirical asymptotic-covering table: best single-round fractions."""

    rows: list[ACRow]
    empirical_constant: float

    def to_csv(self) -> str:
        lines = ["omega,g,fraction,selected"]
        for r in self.rows:
            lines.append(f"{r.omega_index},{r.g},{r.fraction!r},{r.selected}")
        return "\n".join(lines) + "\n"


@dataclass
class BCReport:
    """Partial sums S_Q, correlation sums P_Q and ratios P_Q*mu(B)/S_Q^2."""

    ball: Ball
    indices: list[int]
    checkpoints: list[int]
    S: list                            # S_Q at each checkpoint (Fraction or float)
    P: list
    ratios: list
    ball_mass: object
    quasi_independent: bool | None
    mode: str = "exact"
    flags: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# greedy disjoint cover (the recursion behind every covering statement here)
# ---------------------------------------------------------------------------

def _mass_midpoint(mu: SelfSimilarMeasure, ball: Ball, tol) -> Fraction:
    return mu.eval_measure(ball, tol=tol).midpoint


def _region_mass(mu: SelfSimilarMeasure, omega: BoxUnion, tol) -> MeasureInterval:
    return mu.eval_measure(omega, tol=tol)


class _DisjointChecker:
    """Exact pairwise-disjointness bookkeeping for incrementally selected balls.

    d = 1 keeps a sorted list of intervals (O(log n) per query); higher
    dimensions fall back to a linear scan.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self._intervals: list[tuple[Fraction, Fraction]] = []
        self._balls: list[Ball] = []

    def can_add(self, ball: Ball) -> bool:
        if self.dim == 1:
            lo = ball.center[0] - ball.radius
            hi = ball.center[0] + ball.radius
            i = bisect_left(self._intervals, (lo, hi))
            if i < len(self._intervals) and self._intervals[i][0] <= hi:
                return False
            if i > 0 and self._intervals[i - 1][1] >= lo:
                return False
            return True
        return all(balls_disjoint(ball, other) for other in self._balls)

    def add(self, ball: Ball) -> None:
        if self.dim == 1:
            lo = ball.center[0] - ball.radius
            hi = ball.center[0] + ball.radius
            insort(self._intervals, (lo, hi))
        else:
            self._balls.append(ball)


def greedy_disjoint_cover(seq: BallSequence, mu: SelfSimilarMeasure,
                          omega: BoxUnion | Box, g: int = 0,
                          target: float = 0.75, rounds: int = 1,
                          tol: float = 1e-9) -> CoverFamily:
    """Multi-round greedy disjoint cover of an open set by sequence balls.

    Round i selects, among the balls of index >= g contained in the current
    residual open set, a maximal pairwise-disjoint subfamily scanned in order
    of decreasing mass (midpoints of the certified intervals, ties broken by
    lower index).  The residual then loses the selected closed balls.  Stops
    once the selected mass reaches ``target`` times the mass of omega, or
    when the round budget is exhausted.
    """
    if isinstance(omega, Box):
        omega = BoxUnion([omega])
    if not 0 < target <= 1:
        raise ValueError("target must lie in (0, 1]")
    if omega.is_empty():
        return CoverFamily([], omega, 0.0, g, flags=["empty-omega"])

    omega_mass = _region_mass(mu, omega, tol)
    flags: list[str] = list(f"omega-mass-{fl}" for fl in omega_mass.flags)
    candidates = [
        (i, seq[i]) for i in range(g, len(seq))
        if omega.intersects_closed_box(seq[i].as_box())
    ]
    masses = {i: _mass_midpoint(mu, b, tol) for i, b in candidates}
    order = sorted(candidates, key=lambda ib: (-masses[ib[0]], ib[0]))

    residual = omega.copy()
    chosen: list[int] = []
    chosen_set: set[int] = set()
    covered = Fraction(0)
    covered_hi = Fraction(0)
    per_round: list[int] = []
    goal = as_fraction(target) * omega_mass.midpoint
    rounds_used = 0

    for _ in range(max(1, rounds)):
        rounds_used += 1
        checker = _DisjointChecker(seq.dim)
        picked_this_round: list[tuple[int, Ball]] = []
        for i, ball in order:
            if i in chosen_set:
                continue
            if not residual.contains_ball(ball):
                continue
            if not checker.can_add(ball):
                continue
            checker.add(ball)
            picked_this_round.append((i, ball))
            chosen.append(i)
            chosen_set.add(i)
            interval = mu.eval_measure(ball, tol=tol)
            covered += interval.lo
            covered_hi += interval.hi
        per_round.append(len(picked_this_round))
        for _, ball in picked_this_round:
            residual = residual.subtract_ball(ball)
        if omega_mass.midpoint > 0 and covered >= goal:
            break
        if not picked_this_round:
            break

    if omega_mass.midpoint > 0:
        fraction = float(covered / omega_mass.midpoint)
    else:
        fraction = 0.0
    if not chosen:
        flags.append("empty-selection")
    chosen.sort()
    return CoverFamily(
        indices=chosen,
        omega=omega,
        covered_fraction=fraction,
        min_index=g,
        covered_mass=(float(covered), float(covered_hi)),
        omega_mass=(float(omega_mass.lo), float(omega_mass.hi)),
        rounds_used=rounds_used,
        per_round=per_round,
        flags=flags,
    )


def verify_cover_family(cover: CoverFamily, seq: BallSequence) -> None:
    """Exact post-hoc audit: containment and pairwise disjointness.

    Raises AssertionError on the first violation.
    """
    balls = [seq[i] for i in cover.indices]
    for i, b in zip(cover.indices, balls):
        assert cover.omega.contains_ball(b), f"ball {i} not inside omega"
        assert i >= cover.min_index, f"ball {i} below the index floor"
    if seq.dim == 1:
        spans = sorted(
            (b.center[0] - b.radius, b.center[0] + b.radius, i)
            for i, b in zip(cover.indices, balls)
        )
        for (l1, h1, i1), (l2, h2, i2) in zip(spans, spans[1:]):
            assert h1 < l2, f"balls {i1} and {i2} intersect"
    else:
        for a in range(len(balls)):
            for b in range(a + 1, len(balls)):
                assert balls_disjoint(balls[a], balls[b]), (
                    f"balls {cover.indices[a]} and {cover.indices[b]} intersect"
                )


# ---------------------------------------------------------------------------
# partitions into disjoint families
# ---------------------------------------------------------------------------

def _interval_optimal_coloring(items: list[tuple[Fraction, Fraction, int]]
                               ) -> list[list[int]]:
    """Minimal partition of closed intervals into families of disjoint ones.

    Left-endpoint sweep with a min-heap on right endpoints; touching closed
    intervals conflict.  Optimal because interval graphs are perfect.
    """
    items = sorted(items)
    families: list[list[int]] = []
    heap: list[tuple[Fraction, int]] = []   # (rightmost endpoint, family id)
    for lo, hi, idx in items:
        if heap and heap[0][0] < lo:
            _, fam = heapq.heappop(heap)
        else:
            fam = len(families)
            families.append([])
        families[fam].append(idx)
        heapq.heappush(heap, (hi, fam))
    return families


def _first_fit_families(balls: list[tuple[int, Ball]],
                        conflict: Callable[[Ball, Ball], bool]) -> list[list[int]]:
    """First-fit assignment in the given order; opens a family when forced."""
    families: list[list[int]] = []
    members: list[list[Ball]] = []
    for idx, ball in balls:
        placed = False
        for fam, blist in zip(families, members):
            if all(not conflict(ball, other) for other in blist):
                fam.append(idx)
                blist.append(ball)
                placed = True
                break
        if not placed:
            families.append([idx])
            members.append([ball])
    return families


def color_disjoint_families(balls: Sequence[Ball],
                            indices: Sequence[int] | None = None,
                            scale: Fraction | float = 1) -> list[list[int]]:
    """Partition balls into families whose `scale`-dilations are pairwise disjoint.

    d = 1 uses the minimal interval coloring; d >= 2 uses first-fit in
    decreasing-radius order (an upper bound on the minimal family count).
    """
    if indices is None:
        indices = list(range(len(balls)))
    scale = as_fraction(scale)
    if not balls:
        return []
    dim = balls[0].dim
    if dim == 1:
        items = [
            (b.center[0] - scale * b.radius, b.center[0] + scale * b.radius, i)
            for b, i in zip(balls, indices)
        ]
        return _interval_optimal_coloring(items)
    order = sorted(zip(indices, balls), key=lambda t: (-t[1].radius, t[0]))
    dilated = [(i, scale_ball(b, scale)) for i, b in order]

    def conflict(a: Ball, b: Ball) -> bool:
        return not balls_disjoint(a, b)

    return _first_fit_families(dilated, conflict)


def besicovitch_partition(family: Sequence[Ball], v=1) -> BesicovitchPartition:
    """Besicovitch-style partition of balls centered on a finite set.

    First a greedy selection in decreasing-radius order keeps a ball whenever
    its center is not yet covered (so the selected balls still cover every
    center); the selected balls are then partitioned into families whose
    (1/v)-dilations are pairwise disjoint.
    """
    v = as_fraction(v)
    if not 0 < v <= 1:
        raise ValueError("v must lie in (0, 1]")
    family = list(family)
    if not family:
        return BesicovitchPartition([], [], v, [])
    seen_centers = set()
    for i, b in enumerate(family):
        if b.center in seen_centers:
            raise ValueError(f"duplicate center at position {i}: one ball per center")
        seen_centers.add(b.center)

    order = sorted(range(len(family)), key=lambda i: (-family[i].radius, i))
    selected: list[int] = []
    for i in order:
        center = family[i].center
        if any(family[j].contains_point(center) for j in selected):
            continue
        selected.append(i)
    selected.sort()

    inv = 1 / v
    families = color_disjoint_families(
        [family[i] for i in selected], selected, scale=inv
    )
    uncovered = [
        i for i, b in enumerate(family)
        if not any(family[j].contains_point(b.center) for j in selected)
    ]
    flags = ["uncovered-centers"] if uncovered else []
    return BesicovitchPartition(families, selected, v, uncovered, flags)


def sort_disjoint_families(family: Sequence[Ball], v) -> list[list[int]]:
    """Sort balls with pairwise-disjoint v-dilations into fully disjoint families.

    Requires 0 < v < 1 and verifies the precondition exactly (the offending
    pair is named on violation).  Balls are inserted by ascending scale
    bucket (largest radii first), each into the first family it does not
    meet.
    """
    v = as_fraction(v)
    if not 0 < v < 1:
        raise ValueError("v must lie in (0, 1)")
    family = list(family)
    for i in range(len(family)):
        for j in range(i + 1, len(family)):
            if not balls_disjoint(scale_ball(family[i], v), scale_ball(family[j], v)):
                raise ValueError(
                    f"precondition violated: v-scaled balls {i} and {j} intersect"
                )
    order = sorted(range(len(family)), key=lambda i: (-family[i].radius, i))
    pairs = [(i, family[i]) for i in order]

    def conflict(a: Ball, b: Ball) -> bool:
        return not balls_disjoint(a, b)

    return _first_fit_families(pairs, conflict)


def overlap_count(family: Sequence[Ball], probe: Ball, v) -> int:
    """Exact count of family balls meeting the probe ball.

    Emits a warning (count still returned) when the dilation-disjointness or
    radius preconditions fail.
    """
    v = as_fraction(v)
    family = list(family)
    if any(2 * b.radius < probe.radius for b in family):
        warnings.warn("overlap_count: some family radii fall below half the "
                      "probe radius", stacklevel=2)
    for i in range(len(family)):
        for j in range(i + 1, len(family)):
            if not balls_disjoint(scale_ball(family[i], v), scale_ball(family[j], v)):
                warnings.warn(
                    f"overlap_count: v-scaled balls {i} and {j} intersect",
                    stacklevel=2,
                )
                break
        else:
            continue
        break
    return sum(1 for b in family if not balls_disjoint(b, probe))


# ---------------------------------------------------------------------------
# weak redundancy
# ---------------------------------------------------------------------------

def weak_redundancy_report(seq: BallSequence, k_max: int,
                           k_min: int | None = None) -> RedundancyReport:
    """Family counts J_k of every nonempty scale bucket T_k, k <= k_max.

    J_k is the number of families produced by coloring the intersection
    graph of T_k: minimal in one dimension (interval coloring), an upper
    bound otherwise.  ``slope_tail`` is max over k >= k_min of log2(J_k)/k.
    """
    if k_min is None:
        k_min = max(1, k_max // 2)
    buckets = seq.scale_buckets
    per_scale: list[tuple[int, int, int]] = []
    families: dict[int, list[list[int]]] = {}
    flags: list[str] = []
    if -1 in buckets:
        flags.append(f"{len(buckets[-1])} oversized ball(s) in bucket k=-1")
    for k in sorted(b for b in buckets if 0 <= b <= k_max):
        idxs = buckets[k]
        fams = color_disjoint_families([seq[i] for i in idxs], idxs)
        families[k] = fams
        per_scale.append((k, len(idxs), len(fams)))
    slopes = [math.log2(j) / k for k, _, j in per_scale if k >= max(1, k_min)]
    slope_tail = max(slopes) if slopes else None
    return RedundancyReport(per_scale, slope_tail, families, k_min, flags)


def redundancy_report_from_families(families_by_scale: dict[int, list[list[int]]],
                                    seq: BallSequence,
                                    k_min: int | None = None,
                                    verify: bool = True) -> RedundancyReport:
    """Build a report from an externally constructed partition (a certificate).

    With ``verify=True`` each family is checked for exact pairwise
    disjointness; a violation raises.
    """
    per_scale = []
    for k in sorted(families_by_scale):
        fams = families_by_scale[k]
        if verify:
            for fam in fams:
                balls = [seq[i] for i in fam]
                for a in range(len(balls)):
                    for b in range(a + 1, len(balls)):
                        if not balls_disjoint(balls[a], balls[b]):
                            raise ValueError(
                                f"certificate family at scale {k} contains "
                                f"intersecting balls {fam[a]} and {fam[b]}"
                            )
        count = sum(len(f) for f in fams)
        per_scale.append((k, count, len(fams)))
    ks = [k for k, _, _ in per_scale]
    if k_min is None:
        k_min = max(1, (max(ks) // 2) if ks else 1)
    slopes = [math.log2(j) / k for k, _, j in per_scale if k >= max(1, k_min)]
    return RedundancyReport(per_scale, max(slopes) if slopes else None,
                            dict(families_by_scale), k_min)


# ---------------------------------------------------------------------------
# empirical asymptotic covering
# ---------------------------------------------------------------------------

def ac_empirical_check(seq: BallSequence, mu: SelfSimilarMeasure,
                       omegas: Sequence[BoxUnion | Box],
                       gs: Sequence[int], tol: float = 1e-9) -> ACTable:
    """Best single-round disjoint fraction for each (omega, g) pair.

    The minimum over the table is the empirical covering constant at the
    tested depths; it is finite-depth evidence, never a proof.
    """
    rows: list[ACRow] = []
    for oi, omega in enumerate(omegas):
        for g in gs:
            cover = greedy_disjoint_cover(seq, mu, omega, g=g, target=1.0,
                                          rounds=1, tol=tol)
            rows.append(ACRow(oi, g, cover.covered_fraction,
                              len(cover.indices), cover.flags))
    constant = min((r.fraction for r in rows), default=0.0)
    return ACTable(rows, constant)


# ---------------------------------------------------------------------------
# Borel-Cantelli style sums
# ---------------------------------------------------------------------------

def borel_cantelli_check(seq: BallSequence, mu: SelfSimilarMeasure, ball: Ball,
                         strategy: Callable[[BallSequence, Ball], list[int]] | None = None,
                         Q_max: int = 1000, C: float | None = None,
                         tol: float = 1e-9,
                         checkpoints: Sequence[int] | None = None) -> BCReport:
    """Partial sums S_Q, correlation sums P_Q and ratios for balls inside B.

    The default strategy keeps every sequence ball contained in the open
    probe ball, in original order.  P_Q sums the masses of the pairwise
    intersections (boxes).  When C is supplied the report records whether
    ratio_Q <= C holds at one checkpoint at least.
    """
    if strategy is None:
        probe_box = ball.as_box()

        def strategy(s: BallSequence, b: Ball) -> list[int]:
            return [
                i for i in range(len(s))
                if probe_box.contains_closed_strictly(s[i].as_box())
            ]

    selected = strategy(seq, ball)[:Q_max]
    flags: list[str] = []
    if len(selected) < 2:
        flags.append("fewer-than-2-selected")
    ball_mass_iv = mu.eval_measure(ball, tol=tol)
    ball_mass = ball_mass_iv.midpoint

    boxes = [seq[i].as_box() for i in selected]
    n = len(selected)
    use_float = mu.is_lebesgue and n >= 512
    if checkpoints is None:
        checkpoints = list(range(1, n + 1))
    else:
        checkpoints = [q for q in checkpoints if 1 <= q <= n]

    if use_float:
        mode = "float64"
        lo = np.array([[float(v) for v in b.lo] for b in boxes])
        hi = np.array([[float(v) for v in b.hi] for b in boxes])
        unit_lo, unit_hi = 0.0, 1.0
        clip_lo = np.clip(lo, unit_lo, unit_hi)
        clip_hi = np.clip(hi, unit_lo, unit_hi)
        masses = np.prod(np.maximum(clip_hi - clip_lo, 0.0), axis=1)
        S_all = np.cumsum(masses)
        P_all = np.zeros(n)
        running = 0.0
        for q in range(n):
            il = np.maximum(clip_lo[: q + 1], clip_lo[q])
            ih = np.minimum(clip_hi[: q + 1], clip_hi[q])
            cross = np.prod(np.maximum(ih - il, 0.0), axis=1)
            running += 2.0 * cross.sum() - cross[-1]
            P_all[q] = running
        S = [float(S_all[q - 1]) for q in checkpoints]
        P = [float(P_all[q - 1]) for q in checkpoints]
        bm = float(ball_mass)
        ratios = [
            (p * bm / (s * s)) if s > 0 else math.inf for s, p in zip(S, P)
        ]
    else:
        mode = "exact"
        masses = [mu.eval_measure(b, tol=tol).midpoint for b in boxes]
        S_all: list[Fraction] = []
        P_all: list[Fraction] = []
        s_run = Fraction(0)
        p_run = Fraction(0)
        for q in range(n):
            s_run += masses[q]
            cross = Fraction(0)
            for t in range(q):
                inter = boxes[q].intersection(boxes[t])
                if inter is not None:
                    cross += mu.eval_measure(inter, tol=tol).midpoint
            p_run += 2 * cross + masses[q]
            S_all.append(s_run)
            P_all.append(p_run)
        S = [S_all[q - 1] for q in checkpoints]
        P = [P_all[q - 1] for q in checkpoints]
        ratios = [
            (p * ball_mass / (s * s)) if s > 0 else math.inf
            for s, p in zip(S, P)
        ]

    quasi = None
    if C is not None and ratios:
        quasi = any(r <= C for r in ratios)
    return BCReport(ball, selected, list(checkpoints), S, P, ratios,
                    ball_mass, quasi, mode, flags)
