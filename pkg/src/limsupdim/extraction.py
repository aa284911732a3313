"""Subsequence extraction conditioned on scale and on mass behavior.

Three extraction families:

* `extract_weakly_redundant` reruns the greedy cover once per scale and
  keeps the union, which bounds the per-scale family count J_k by k+1 by
  construction (each scale-k bucket of the result only meets the first k+1
  disjoint cover families).
* `extract_lower_conditioned` / `extract_upper_conditioned` keep exactly the
  balls whose certified mass interval sits on the right side of the
  |B|^(dim -/+ eps) threshold.
* `extract_conditioned` is the diagonal construction: step k covers the
  space with balls filtered at tolerance eps_(k+i) on sub-step i, so every
  tolerance is eventually abandoned and the kept mass ratios converge to
  the measure dimension.

Mass thresholds compare against powers of the diameter |B| = 2r.  All the
defining inequalities of a result can be re-verified from fresh certified
evaluations via :func:`verify_conditioning`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .covering import (
    ACTable,
    RedundancyReport,
    ac_empirical_check,
    greedy_disjoint_cover,
    redundancy_report_from_families,
)
from .geometry import Ball, as_fraction, scale_ball, scale_index
from .measure import SelfSimilarMeasure, measure_dimension
from .regions import BoxUnion
from .sequences import BallSequence

DEFAULT_TOL = 1e-9


@dataclass
class ExtractionResult:
    """A kept subsequence plus the evidence that justified keeping it."""

    parent: BallSequence
    indices: list[int]
    ratios: list[float | None]
    masses: list[tuple[float, float]]
    eps_schedule: list[float]
    kept_by: list[str]
    eps_per_ball: list[float | None]
    certificates: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("selected indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.indices)

    def subsequence(self) -> BallSequence:
        return self.parent.subsequence(self.indices, {"extracted": True})

    def cut_index(self, eps: float) -> int:
        """Largest selected index whose recorded tolerance exceeds eps.

        Beyond this index every kept ball satisfies its mass inequalities at
        tolerance <= eps.  Returns -1 when every recorded tolerance is fine.
        """
        worst = -1
        for idx, e in zip(self.indices, self.eps_per_ball):
            if e is not None and e > eps:
                worst = max(worst, idx)
        return worst

    def to_csv(self) -> str:
        lines = ["index,radius,mass_lo,mass_hi,ratio,kept_by"]
        for pos, idx in enumerate(self.indices):
            r = float(self.parent[idx].radius)
            lo, hi = self.masses[pos]
            ratio = self.ratios[pos]
            ratio_s = "" if ratio is None else repr(ratio)
            lines.append(
                f"{idx},{r!r},{lo!r},{hi!r},{ratio_s},{self.kept_by[pos]}"
            )
        return "\n".join(lines) + "\n"


def _mass_and_ratio(mu: SelfSimilarMeasure, ball: Ball, tol):
    iv = mu.eval_measure(ball, tol=tol)
    diam = float(ball.diameter)
    if iv.midpoint > 0 and diam != 1.0:
        ratio = math.log(float(iv.midpoint)) / math.log(diam)
    else:
        ratio = None
    return iv, ratio


def _result(parent, indices, mu, tol, kept_by, eps_per_ball, schedule,
            certificates=None, flags=None, metadata=None) -> ExtractionResult:
    ratios = []
    masses = []
    for i in indices:
        iv, ratio = _mass_and_ratio(mu, parent[i], tol)
        ratios.append(ratio)
        masses.append((float(iv.lo), float(iv.hi)))
    return ExtractionResult(
        parent=parent,
        indices=list(indices),
        ratios=ratios,
        masses=masses,
        eps_schedule=list(schedule),
        kept_by=list(kept_by),
        eps_per_ball=list(eps_per_ball),
        certificates=certificates or {},
        flags=list(flags or []),
        metadata=metadata or {},
    )


# ---------------------------------------------------------------------------
# weak redundancy extraction
# ---------------------------------------------------------------------------

def extract_weakly_redundant(seq: BallSequence, mu: SelfSimilarMeasure,
                             k_max: int, target: float = 0.75,
                             rounds: int = 6, tol: float = DEFAULT_TOL,
                             with_ac_table: bool = True) -> ExtractionResult:
    """Per-scale greedy covers glued into a weakly redundant subsequence.

    For each k <= k_max, a greedy disjoint cover restricted to indices past
    g_k (the first tail where every radius is <= 2^-k) contributes one family
    of pairwise-disjoint balls at scale <= 2^-k.  A ball of the result with
    radius in (2^(-j-1), 2^-j] can only come from the families k <= j, so
    the scale-j bucket splits into at most j+1 disjoint families.  That
    partition ships with the result as an exactly verified certificate.
    """
    if not len(seq):
        raise ValueError("empty sequence")
    omega = seq.bounding_region(pad=1)
    selected: dict[int, int] = {}            # index -> k of first selection
    flags: list[str] = []
    for k in range(0, k_max + 1):
        g_k = seq.tail_start_for_scale(k)
        if g_k is None:
            flags.append(f"truncated: no tail with radii <= 2^-{k}")
            break
        cover = greedy_disjoint_cover(seq, mu, omega, g=g_k, target=target,
                                      rounds=rounds, tol=tol)
        if cover.covered_fraction < target:
            flags.append(
                f"scale {k}: fraction {cover.covered_fraction:.3f} below target"
            )
        for i in cover.indices:
            selected.setdefault(i, k)

    indices = sorted(selected)
    # certificate: bucket j of the result partitioned by originating run k
    sub_positions = {idx: pos for pos, idx in enumerate(indices)}
    grouping: dict[int, dict[int, list[int]]] = {}
    for idx in indices:
        j = scale_index(seq[idx])
        if j < 0:
            continue
        grouping.setdefault(j, {}).setdefault(selected[idx], []).append(
            sub_positions[idx]
        )
    families_by_scale = {
        j: [fam for _, fam in sorted(runs.items())]
        for j, runs in grouping.items()
    }

    subseq = seq.subsequence(indices)
    certificate = redundancy_report_from_families(families_by_scale, subseq,
                                                  verify=True)
    certs = {"redundancy": certificate}
    if with_ac_table and indices:
        certs["ac_table"] = ac_empirical_check(
            subseq, mu, [omega], [0], tol=tol
        )
    return _result(
        seq, indices, mu, tol,
        kept_by=[f"scale<=2^-{selected[i]}" for i in indices],
        eps_per_ball=[None] * len(indices),
        schedule=[],
        certificates=certs,
        flags=flags,
        metadata={"k_max": k_max, "target": target},
    )


# ---------------------------------------------------------------------------
# pointwise predicate and mass-conditioned filters
# ---------------------------------------------------------------------------

@dataclass
class PredicateResult:
    """Grid-verified membership in the mass lower/upper envelope sets."""

    in_lower_envelope: bool | None     # mass <= r^(alpha - eps) on the grid
    in_upper_envelope: bool | None     # mass >= r^(gamma + eps) on the grid
    rows: list[tuple[float, float, float, float, float]]
    alpha: float
    gamma: float
    eps: float


def point_dim_predicate(mu: SelfSimilarMeasure, x, interval, rho, eps,
                        r_grid: Sequence, tol: float = DEFAULT_TOL
                        ) -> PredicateResult:
    """Check mass envelopes mu(B(x,r)) <= r^(alpha-eps), >= r^(gamma+eps).

    Certified sides only: the lower-envelope check uses interval highs, the
    upper-envelope check uses interval lows; a straddling interval leaves
    the corresponding verdict undetermined (None).
    """
    alpha, gamma = (as_fraction(interval[0]), as_fraction(interval[1]))
    if alpha > gamma:
        raise ValueError("interval must satisfy alpha <= gamma")
    rho = as_fraction(rho)
    eps = as_fraction(eps)
    radii = [as_fraction(r) for r in r_grid]
    if any(r <= 0 or r > rho for r in radii):
        raise ValueError("r_grid must lie in (0, rho]")
    in_e: bool | None = True
    in_f: bool | None = True
    rows = []
    for r in radii:
        iv = mu.eval_measure(Ball(x, r), tol=tol)
        rf = float(r)
        e_thr = rf ** float(alpha - eps)
        f_thr = rf ** float(gamma + eps)
        rows.append((rf, float(iv.lo), float(iv.hi), e_thr, f_thr))
        if in_e is not False:
            if float(iv.hi) > e_thr:
                in_e = False if float(iv.lo) > e_thr else None
        if in_f is not False:
            if float(iv.lo) < f_thr:
                in_f = False if float(iv.hi) < f_thr else None
    return PredicateResult(in_e, in_f, rows, float(alpha), float(gamma),
                           float(eps))


def _require_exact_dimensional(mu: SelfSimilarMeasure) -> float:
    if not (mu.is_lebesgue or mu.osc_asserted):
        raise ValueError(
            "conditioned extraction needs an exact-dimensional measure with "
            "a computable dimension; assert the open set condition "
            "(osc_asserted=True) or use the built-in Lebesgue measure"
        )
    return measure_dimension(mu)


def extract_lower_conditioned(seq: BallSequence, mu: SelfSimilarMeasure,
                              eps: float, tol: float = DEFAULT_TOL,
                              with_ac_table: bool = False) -> ExtractionResult:
    """Keep exactly the balls with certified mass <= |B|^(dim - eps)."""
    eps = float(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    dim = _require_exact_dimensional(mu)
    kept = []
    for i, b in enumerate(seq):
        iv = mu.eval_measure(b, tol=tol)
        if float(iv.hi) <= float(b.diameter) ** (dim - eps):
            kept.append(i)
    flags = [] if kept else ["empty-result"]
    certs = {}
    if with_ac_table and kept:
        sub = seq.subsequence(kept)
        certs["ac_table"] = ac_empirical_check(
            sub, mu, [seq.bounding_region(pad=1)], [0], tol=tol
        )
    return _result(seq, kept, mu, tol, kept_by=["lower"] * len(kept),
                   eps_per_ball=[eps] * len(kept), schedule=[eps],
                   certificates=certs, flags=flags,
                   metadata={"eps": eps, "dim": dim, "side": "lower"})


def extract_upper_conditioned(seq: BallSequence, mu: SelfSimilarMeasure,
                              eps: float, v: float = 0.5,
                              v_prime: float | None = None,
                              tol: float = DEFAULT_TOL) -> ExtractionResult:
    """Keep exactly the balls with certified mass >= |B|^(dim + eps)."""
    eps = float(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = float(v)
    if v_prime is None:
        v_prime = (v + 1) / 2
    if not 0 < v < v_prime < 1:
        raise ValueError("need 0 < v < v_prime < 1")
    dim = _require_exact_dimensional(mu)
    kept = []
    for i, b in enumerate(seq):
        iv = mu.eval_measure(b, tol=tol)
        if float(iv.lo) >= float(b.diameter) ** (dim + eps):
            kept.append(i)
    flags = [] if kept else ["empty-result"]
    return _result(seq, kept, mu, tol, kept_by=["upper"] * len(kept),
                   eps_per_ball=[eps] * len(kept), schedule=[eps],
                   flags=flags,
                   metadata={"eps": eps, "dim": dim, "side": "upper",
                             "v": v, "v_prime": v_prime})


def verify_conditioning(result: ExtractionResult, mu: SelfSimilarMeasure,
                        tol: float = DEFAULT_TOL) -> None:
    """Re-verify each kept ball's defining inequality from fresh evaluations."""
    dim = result.metadata.get("dim")
    if dim is None:
        dim = _require_exact_dimensional(mu)
    for pos, idx in enumerate(result.indices):
        eps = result.eps_per_ball[pos]
        if eps is None:
            continue
        ball = result.parent[idx]
        iv = mu.eval_measure(ball, tol=tol)
        diam = float(ball.diameter)
        side = result.kept_by[pos]
        if side in ("lower", "both"):
            assert float(iv.hi) <= diam ** (dim - eps), (
                f"ball {idx}: mass above |B|^(dim-eps)"
            )
        if side in ("upper", "both"):
            assert float(iv.lo) >= diam ** (dim + eps), (
                f"ball {idx}: mass below |B|^(dim+eps)"
            )


# ---------------------------------------------------------------------------
# the diagonal construction
# ---------------------------------------------------------------------------

def default_eps_schedule(n: int) -> list[float]:
    return [1.0 / (i + 1) for i in range(1, n + 1)]


def extract_conditioned(seq: BallSequence, mu: SelfSimilarMeasure,
                        eps_schedule: Sequence[float] | None = None,
                        k_max: int = 6, target: float = 0.5,
                        substeps_max: int = 6, rounds: int = 3,
                        tol: float = DEFAULT_TOL) -> ExtractionResult:
    """Diagonal extraction: mass ratios of the kept tail approach dim(mu).

    Step k works with the tail past g_k (all radii <= 2^-k).  Sub-step i
    filters that tail by both mass conditions at tolerance eps_(k+i), then
    greedily covers the current residual; the residual shrinks by the balls
    selected so far in this step.  Every kept ball of sub-step (k, i)
    satisfies |B|^(dim+eps) <= mu(B) <= |B|^(dim-eps) with eps = eps_(k+i),
    so for any eps > 0 only the finitely many balls taken at tolerances
    above eps can violate the eps-band: the reported cut index locates them.
    """
    if eps_schedule is None:
        eps_schedule = default_eps_schedule(k_max + substeps_max + 2)
    eps_schedule = [float(e) for e in eps_schedule]
    if any(e <= 0 for e in eps_schedule):
        raise ValueError("eps schedule must be positive")
    if any(a < b for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps schedule must be non-increasing")
    dim = _require_exact_dimensional(mu)

    selected: dict[int, tuple[float, str]] = {}
    flags: list[str] = []
    omega_full = seq.bounding_region(pad=1)

    def eps_at(j: int) -> float:
        return eps_schedule[min(j, len(eps_schedule) - 1)]

    for k in range(1, k_max + 1):
        g_k = seq.tail_start_for_scale(k)
        if g_k is None:
            flags.append(f"step {k} truncated: no tail at scale 2^-{k}")
            break
        residual = omega_full.copy()
        omega_mass = mu.eval_measure(residual, tol=tol).midpoint
        covered = Fraction(0)
        reached = False
        for i in range(1, substeps_max + 1):
            eps = eps_at(k + i - 1)
            eligible = []
            for idx in range(g_k, len(seq)):
                ball = seq[idx]
                iv = mu.eval_measure(ball, tol=tol)
                diam = float(ball.diameter)
                if (float(iv.hi) <= diam ** (dim - eps)
                        and float(iv.lo) >= diam ** (dim + eps)):
                    eligible.append(idx)
            if not eligible:
                continue
            pool = seq.subsequence(eligible)
            cover = greedy_disjoint_cover(pool, mu, residual, g=0,
                                          target=1.0, rounds=rounds, tol=tol)
            for pos in cover.indices:
                orig = eligible[pos]
                if orig not in selected:
                    selected[orig] = (eps, "both")
                ball = seq[orig]
                covered += mu.eval_measure(ball, tol=tol).lo
                residual = residual.subtract_ball(ball)
            if omega_mass > 0 and covered >= as_fraction(target) * omega_mass:
                reached = True
                break
        if not reached:
            flags.append(f"step {k}: coverage target not reached within budget")

    indices = sorted(selected)
    return _result(
        seq, indices, mu, tol,
        kept_by=[selected[i][1] for i in indices],
        eps_per_ball=[selected[i][0] for i in indices],
        schedule=eps_schedule,
        flags=flags,
        metadata={"dim": dim, "k_max": k_max, "target": target},
    )


# ---------------------------------------------------------------------------
# relevance classification
# ---------------------------------------------------------------------------

@dataclass
class RelevanceReport:
    """Thin/fat classification plus tail union-mass estimates."""

    thin_indices: list[int]            # mass <= |B|^(alpha+eps): too thin
    fat_indices: list[int]             # mass >= |B|^(alpha-eps): too fat
    neutral_indices: list[int]
    tail_masses: list[tuple[int, float, float]]   # (g, thin v-dilated, fat)
    alpha: float
    eps: float
    v: float


def classify_relevance(seq: BallSequence, mu: SelfSimilarMeasure, eps: float,
                       v: float, gs: Sequence[int] | None = None,
                       tol: float = DEFAULT_TOL) -> RelevanceReport:
    """Split balls into thin/fat relative to |B|^(alpha +/- eps).

    For increasing tail starts g, estimates the mass of the union of the
    v-dilated thin balls and of the fat balls past g; vanishing tails are
    the numerical signature that neither class can carry a full-mass limsup.
    """
    eps = float(eps)
    v = float(v)
    if not 0 < v < 1:
        raise ValueError("v must lie in (0, 1)")
    alpha = _require_exact_dimensional(mu)
    thin, fat, neutral = [], [], []
    for i, b in enumerate(seq):
        iv = mu.eval_measure(b, tol=tol)
        diam = float(b.diameter)
        if float(iv.hi) <= diam ** (alpha + eps):
            thin.append(i)
        elif float(iv.lo) >= diam ** (alpha - eps):
            fat.append(i)
        else:
            neutral.append(i)
    if gs is None:
        n = len(seq)
        gs = sorted({0, n // 4, n // 2, (3 * n) // 4})
    rows = []
    for g in gs:
        thin_boxes = [scale_ball(seq[i], v).as_box() for i in thin if i >= g]
        fat_boxes = [seq[i].as_box() for i in fat if i >= g]
        thin_mass = _union_mass(mu, thin_boxes, tol)
        fat_mass = _union_mass(mu, fat_boxes, tol)
        rows.append((g, thin_mass, fat_mass))
    return RelevanceReport(thin, fat, neutral, rows, alpha, eps, v)


def _union_mass(mu: SelfSimilarMeasure, boxes, tol) -> float:
    if not boxes:
        return 0.0
    region = BoxUnion([b for b in boxes])
    iv = mu.eval_measure(region, tol=max(tol, 1e-6), budget=200_000)
    return float(iv.midpoint)
