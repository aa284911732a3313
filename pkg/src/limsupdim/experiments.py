"""Sequence generators, end-to-end pipelines, configuration and persistence.

Generators
----------
* `gen_farey(q_max)`: balls B(p/q, 1/q^2) over coprime 0 <= p <= q <= q_max,
  ordered by q then p (exact rational centers).
* `gen_random(n, ...)`: uniform centers from a seeded PCG64 stream, radii
  from a/n rules or explicit lists, plus a divergence diagnostic for the
  random-covering criterion sum(n^-2 exp(l_1+...+l_n)).
* `gen_ifs_orbit(mu, x, depth, factor)`: orbit balls B(f_w(x),
  factor*|K|*c_w) over all words up to a depth.

The pipeline chains generator -> optional extractions -> ball/rectangle
transform -> critical-exponent estimate, persists every intermediate as CSV
and writes a manifest with content hashes, so determinism is checkable by
re-running the config and comparing bytes.

Randomness: PCG64 (numpy's default bit generator), seeded explicitly; the
algorithm name and seed are recorded in the manifest.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__ as _pkg_version
from .dimension import (
    CoverCostTable,
    DimensionReport,
    natural_cover_critical_exponent,
    predict_rect_dim,
    predict_shrunk_ball_dim,
)
from .extraction import extract_conditioned, extract_weakly_redundant
from .geometry import Ball, as_fraction, as_point
from .measure import SelfSimilarMeasure, measure_dimension, point_in_support
from .sequences import BallSequence

PRNG_NAME = "numpy-PCG64"


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def totient_sieve(n: int) -> np.ndarray:
    """Euler phi for 0..n by the standard multiplicative sieve."""
    phi = np.arange(n + 1, dtype=np.int64)
    for p in range(2, n + 1):
        if phi[p] == p:
            phi[p::p] -= phi[p::p] // p
    return phi


def gen_farey(q_max: int) -> BallSequence:
    """Balls B(p/q, 1/q^2), gcd(p,q)=1, 0 <= p <= q <= q_max, by q then p."""
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    balls = [Ball((Fraction(0),), Fraction(1)), Ball((Fraction(1),), Fraction(1))]
    for q in range(2, q_max + 1):
        r = Fraction(1, q * q)
        for p in range(1, q):
            if math.gcd(p, q) == 1:
                balls.append(Ball((Fraction(p, q),), r))
    return BallSequence(balls, {"generator": "farey", "q_max": q_max})


def farey_cost_table(q_max: int, delta: float = 1.0) -> CoverCostTable:
    """Grouped (diameter, multiplicity) table of the farey sequence.

    Equivalent to the ballwise table of ``gen_farey(q_max).contracted(delta)``
    but without materializing the balls; the order (by q then p) matches, so
    tail indexing agrees.
    """
    phi = totient_sieve(q_max).astype(float)
    counts = phi[1:].copy()
    counts[0] = 2.0
    qs = np.arange(1, q_max + 1, dtype=float)
    radii = qs ** (-2.0 * float(delta))
    return CoverCostTable(2.0 * radii, counts)


@dataclass
class SheppDiagnostic:
    """Finite-N growth diagnostic for sum n^-2 exp(l_1+...+l_n).

    `appears_divergent` reports whether the log-log slope of the terms over
    the tail half is >= -1; it is evidence at the truncation, never a
    covering claim.
    """

    partial_sums: list[float]
    term_exponent: float
    appears_divergent: bool


def shepp_diagnostic(lengths: Sequence[float]) -> SheppDiagnostic:
    lengths = np.asarray(lengths, dtype=float)
    n = np.arange(1, len(lengths) + 1, dtype=float)
    log_terms = -2.0 * np.log(n) + np.cumsum(lengths)
    partial = np.cumsum(np.exp(np.minimum(log_terms, 700.0)))
    half = len(lengths) // 2
    x = np.log(n[half:])
    y = log_terms[half:]
    slope = float(np.polyfit(x, y, 1)[0]) if len(x) >= 2 else float("nan")
    return SheppDiagnostic(partial.tolist(), slope, bool(slope >= -1.0))


def gen_random(n: int, length_rule="2/n", seed: int | None = None,
               d: int = 1) -> BallSequence:
    """Uniform centers on [0,1]^d with radii from the length rule.

    length_rule is either the string "a/n" (radius a/index) or an explicit
    list of radii.  The seed is mandatory; the PCG64 stream makes runs
    bit-reproducible.  The sequence metadata carries the covering-sum
    divergence diagnostic.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if seed is None:
        raise ValueError("seed is mandatory for the random generator")
    if isinstance(length_rule, str):
        num = length_rule.split("/")[0].strip()
        if not length_rule.replace(" ", "").endswith("/n"):
            raise ValueError("string length rules must look like 'a/n'")
        a = float(num)
        if a <= 0:
            raise ValueError("rule coefficient must be positive")
        radii = [a / k for k in range(1, n + 1)]
        rule_desc = f"{a}/n"
    else:
        radii = [float(r) for r in length_rule][:n]
        if len(radii) != n:
            raise ValueError("explicit radius list shorter than n")
        rule_desc = "explicit"
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = rng.random((n, d))
    balls = [
        Ball(tuple(as_fraction(float(c)) for c in centers[i]),
             as_fraction(radii[i]))
        for i in range(n)
    ]
    diag = shepp_diagnostic(radii) if n >= 4 else None
    meta = {
        "generator": "random", "n": n, "seed": seed, "prng": PRNG_NAME,
        "length_rule": rule_desc,
    }
    if diag is not None:
        meta["shepp_term_exponent"] = diag.term_exponent
        meta["shepp_appears_divergent"] = diag.appears_divergent
    return BallSequence(balls, meta)


def gen_ifs_orbit(mu: SelfSimilarMeasure, x, depth: int,
                  factor=3) -> BallSequence:
    """Orbit balls B(f_w(x), factor * |K| * c_w), |w| <= depth.

    Words are ordered by length then lexicographically; |K| is the certified
    upper bound on the attractor diameter so the generation-k balls still
    cover the attractor.  x must sit in a depth-8 cylinder.
    """
    x = as_point(x)
    if depth < 0:
        raise ValueError("depth must be >= 0")
    factor = as_fraction(factor)
    if not point_in_support(mu, x, depth=8):
        raise ValueError("x is not within any depth-8 cylinder of the attractor")
    from .measure import attractor_diameter

    diam_lo, diam_hi = attractor_diameter(mu)
    diam = diam_hi
    balls = []
    level = [(x, Fraction(1))]
    balls.append(Ball(x, factor * diam))
    for _ in range(depth):
        nxt = []
        for pt, c in level:
            for m in mu.maps:
                nxt.append((m.apply_point(pt), c * m.ratio))
        level = nxt
        for pt, c in level:
            balls.append(Ball(pt, factor * diam * c))
    meta = {
        "generator": "ifs", "depth": depth, "factor": float(factor),
        "attractor_diameter": float(diam),
        "attractor_diameter_exact": bool(diam_lo == diam_hi),
    }
    return BallSequence(balls, meta)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Pipeline configuration; parses from key = value sections.

    Sections: [generator] (kind = farey|random|ifs plus its parameters),
    [measure] (spec = lebesgue d | file path | cantor), [pipeline]
    (extract_wr, extract_conditioned, delta or tau, budgets), [output].
    """

    generator: dict = field(default_factory=dict)
    measure: dict = field(default_factory=lambda: {"spec": "lebesgue 1"})
    pipeline: dict = field(default_factory=dict)
    out_dir: str = "runs"
    seed: int | None = None

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        cfg = cls()
        if cp.has_section("generator"):
            cfg.generator = dict(cp.items("generator"))
        if cp.has_section("measure"):
            cfg.measure = dict(cp.items("measure"))
        if cp.has_section("pipeline"):
            cfg.pipeline = dict(cp.items("pipeline"))
        if cp.has_section("output"):
            cfg.out_dir = cp.get("output", "dir", fallback=cfg.out_dir)
        seed = cfg.generator.get("seed")
        cfg.seed = int(seed) if seed is not None else None
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_ini(Path(path).read_text())

    def canonical_text(self) -> str:
        buf = io.StringIO()
        for section, data in (("generator", self.generator),
                              ("measure", self.measure),
                              ("pipeline", self.pipeline)):
            buf.write(f"[{section}]\n")
            for k in sorted(data):
                buf.write(f"{k} = {data[k]}\n")
        return buf.getvalue()

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def build_measure(self) -> SelfSimilarMeasure:
        spec = self.measure.get("spec", "lebesgue 1").strip()
        if spec.startswith("lebesgue"):
            return SelfSimilarMeasure.lebesgue(int(spec.split()[1]))
        if spec == "cantor":
            probs = self.measure.get("probs")
            if probs:
                p = [as_fraction(float(v)) for v in probs.split()]
                return SelfSimilarMeasure.cantor(p)
            return SelfSimilarMeasure.cantor()
        return SelfSimilarMeasure.from_text(Path(spec).read_text())


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    prng: str
    steps: list[dict]
    outputs: dict[str, str]            # filename -> sha256 of bytes
    wall_clock: dict[str, float]
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_hash": self.config_hash,
                "tool_version": self.tool_version,
                "prng": self.prng,
                "steps": self.steps,
                "outputs": self.outputs,
                "wall_clock": self.wall_clock,
                "flags": self.flags,
            },
            indent=2, sort_keys=True,
        )


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def _write(out_dir: Path, name: str, data: str, manifest_outputs: dict) -> None:
    path = out_dir / name
    path.write_text(data)
    manifest_outputs[name] = hashlib.sha256(data.encode()).hexdigest()


def run_pipeline(config: ExperimentConfig, out_dir=None) -> RunManifest:
    """generator -> optional extractions -> transform -> estimate -> report.

    Every intermediate lands in the output directory as CSV / plain text;
    the manifest records per-step wall clock, flags and output hashes.
    Rerunning the same config reproduces the CSV outputs byte for byte.
    """
    out_dir = Path(out_dir if out_dir is not None else config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mu = config.build_measure()
    steps: list[dict] = []
    outputs: dict[str, str] = {}
    clocks: dict[str, float] = {}
    flags: list[str] = []

    gen = dict(config.generator)
    kind = gen.get("kind", "farey")
    pipe = dict(config.pipeline)
    do_wr = pipe.get("extract_wr", "0") in ("1", "true", "yes")
    do_cond = pipe.get("extract_conditioned", "0") in ("1", "true", "yes")
    delta = float(pipe.get("delta", 1.0))
    tau = None
    if "tau" in pipe:
        tau = tuple(float(v) for v in pipe["tau"].split())
    tol = float(pipe.get("tol", 1e-9))
    budget = int(pipe.get("budget", 10**6))

    # -- generate ---------------------------------------------------------
    t0 = time.perf_counter()
    seq: BallSequence | None = None
    table: CoverCostTable | None = None
    if kind == "farey":
        q_max = int(gen.get("q_max", 100))
        needs_balls = do_wr or do_cond or tau is not None
        if needs_balls or q_max <= 2000:
            seq = gen_farey(q_max)
        else:
            table = farey_cost_table(q_max, delta=delta)
            steps.append({"step": "generate", "kind": "farey-grouped",
                          "q_max": q_max, "sets": table.total})
    elif kind == "random":
        seq = gen_random(int(gen.get("n", 100)), gen.get("length_rule", "2/n"),
                         seed=int(gen["seed"]), d=int(gen.get("d", 1)))
    elif kind == "ifs":
        x = tuple(float(v) for v in gen.get("x", "0").split())
        seq = gen_ifs_orbit(mu, x, int(gen.get("depth", 6)),
                            as_fraction(float(gen.get("factor", 3))))
    else:
        raise ValueError(f"unknown generator kind {kind!r}")
    clocks["generate"] = time.perf_counter() - t0
    if seq is not None:
        _write(out_dir, "sequence.txt", seq.to_text(), outputs)
        steps.append({"step": "generate", "kind": kind, "count": len(seq),
                      "metadata": {k: v for k, v in seq.metadata.items()
                                   if isinstance(v, (int, float, str, bool))}})
        for issue in seq.validate():
            flags.append(f"generate: {issue}")

    # -- extraction -------------------------------------------------------
    if seq is not None and do_wr:
        t0 = time.perf_counter()
        res = extract_weakly_redundant(
            seq, mu, k_max=int(pipe.get("k_max", 8)),
            target=float(pipe.get("target", 0.75)), tol=tol,
        )
        clocks["extract_wr"] = time.perf_counter() - t0
        _write(out_dir, "extract_wr.csv", res.to_csv(), outputs)
        _write(out_dir, "extract_wr_redundancy.csv",
               res.certificates["redundancy"].to_csv(), outputs)
        steps.append({"step": "extract_wr", "kept": len(res.indices),
                      "flags": res.flags})
        flags.extend(f"extract_wr: {f}" for f in res.flags)
        seq = res.subsequence()

    if seq is not None and do_cond:
        t0 = time.perf_counter()
        res = extract_conditioned(
            seq, mu, k_max=int(pipe.get("k_max", 6)),
            target=float(pipe.get("cond_target", 0.5)), tol=tol,
        )
        clocks["extract_conditioned"] = time.perf_counter() - t0
        _write(out_dir, "extract_conditioned.csv", res.to_csv(), outputs)
        steps.append({"step": "extract_conditioned", "kept": len(res.indices),
                      "cut_index_0.1": res.cut_index(0.1), "flags": res.flags})
        flags.extend(f"extract_conditioned: {f}" for f in res.flags)
        seq = res.subsequence()

    # -- transform + estimate ----------------------------------------------
    t0 = time.perf_counter()
    try:
        dim_mu = measure_dimension(mu)
    except ValueError:
        dim_mu = None
        flags.append("estimate: measure dimension unavailable (no OSC assertion)")
    if tau is not None:
        mode = "rect"
        prediction = predict_rect_dim(dim_mu, tau) if dim_mu is not None else None
        formula = "min_i (dim+sum_(j<=i)(tau_i-tau_j))/tau_i"
    else:
        mode = "ball"
        prediction = (predict_shrunk_ball_dim(dim_mu, delta)
                      if dim_mu is not None else None)
        formula = "dim/delta"
    if table is None:
        table = CoverCostTable.from_sequence(seq)
        if mode == "ball" and delta != 1.0:
            radii = table.diams / 2.0
            table = CoverCostTable(2.0 * radii**delta, table.counts)
        effective_delta = 1.0
    else:
        effective_delta = 1.0            # grouped farey table is pre-contracted
    report = natural_cover_critical_exponent(
        table, mode=mode, delta=effective_delta, tau=tau,
        prediction=prediction, prediction_formula=formula,
    )
    clocks["estimate"] = time.perf_counter() - t0
    _write(out_dir, "dimension_report.csv", report.to_csv(), outputs)
    _write(out_dir, "tail_sums.dat",
           "".join(f"{s!r} {v!r}\n" for s, v in report.grid), outputs)
    steps.append({"step": "estimate", "mode": mode,
                  "prediction": prediction, "estimate": report.estimate,
                  "flags": report.flags})
    flags.extend(f"estimate: {f}" for f in report.flags)

    manifest = RunManifest(
        config_hash=config.config_hash(),
        tool_version=_pkg_version,
        prng=PRNG_NAME,
        steps=steps,
        outputs=outputs,
        wall_clock=clocks,
        flags=flags,
    )
    (out_dir / "manifest.json").write_text(manifest.to_json())
    return manifest
