"""Scikit-learn style front end: fit/transform/predict over ball sequences.

The extractors are transformers (X is a BallSequence, transform returns the
kept subsequence), the relevance classifier is predict-shaped, and the
critical-exponent estimator is a fit-only estimator exposing ``estimate_``.
Constructor arguments are stored verbatim so ``get_params`` / ``set_params``
/ ``clone`` behave as scikit-learn expects.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .covering import weak_redundancy_report
from .dimension import (
    CoverCostTable,
    natural_cover_critical_exponent,
    predict_rect_dim,
    predict_shrunk_ball_dim,
)
from .extraction import (
    classify_relevance,
    extract_conditioned,
    extract_lower_conditioned,
    extract_upper_conditioned,
    extract_weakly_redundant,
)
from .measure import SelfSimilarMeasure, measure_dimension
from .validation import check_ball_sequence, check_is_fitted, check_measure


class WeaklyRedundantExtractor(BaseEstimator, TransformerMixin):
    """Select a weakly redundant subsequence with per-scale disjoint covers.

    After ``fit`` the attributes ``result_`` (full extraction result with
    certificates) and ``redundancy_`` (the per-scale family report) are
    available; ``transform`` maps the fitted sequence to the kept
    subsequence.
    """

    def __init__(self, measure=None, k_max=8, target=0.75, rounds=6, tol=1e-9):
        self.measure = measure
        self.k_max = k_max
        self.target = target
        self.rounds = rounds
        self.tol = tol

    def _measure_for(self, seq):
        if self.measure is not None:
            return check_measure(self.measure, seq.dim)
        return SelfSimilarMeasure.lebesgue(seq.dim)

    def fit(self, X, y=None):
        seq = check_ball_sequence(X)
        mu = self._measure_for(seq)
        self.result_ = extract_weakly_redundant(
            seq, mu, k_max=self.k_max, target=self.target,
            rounds=self.rounds, tol=self.tol,
        )
        self.redundancy_ = self.result_.certificates["redundancy"]
        self.n_selected_ = len(self.result_.indices)
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        seq = check_ball_sequence(X)
        return seq.subsequence(self.result_.indices)


class ConditionedExtractor(BaseEstimator, TransformerMixin):
    """Diagonal extraction: kept mass ratios converge to the measure dimension."""

    def __init__(self, measure=None, eps_schedule=None, k_max=6, target=0.5,
                 substeps_max=6, rounds=3, tol=1e-9):
        self.measure = measure
        self.eps_schedule = eps_schedule
        self.k_max = k_max
        self.target = target
        self.substeps_max = substeps_max
        self.rounds = rounds
        self.tol = tol

    def fit(self, X, y=None):
        seq = check_ball_sequence(X)
        mu = check_measure(self.measure, seq.dim)
        self.result_ = extract_conditioned(
            seq, mu, eps_schedule=self.eps_schedule, k_max=self.k_max,
            target=self.target, substeps_max=self.substeps_max,
            rounds=self.rounds, tol=self.tol,
        )
        self.dim_ = self.result_.metadata["dim"]
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        seq = check_ball_sequence(X)
        return seq.subsequence(self.result_.indices)


class MassConditionFilter(BaseEstimator, TransformerMixin):
    """Keep balls on one side of the |B|^(dim -/+ eps) mass threshold."""

    def __init__(self, measure=None, eps=0.1, side="lower", v=0.5,
                 v_prime=None, tol=1e-9):
        self.measure = measure
        self.eps = eps
        self.side = side
        self.v = v
        self.v_prime = v_prime
        self.tol = tol

    def fit(self, X, y=None):
        seq = check_ball_sequence(X)
        mu = check_measure(self.measure, seq.dim)
        if self.side == "lower":
            self.result_ = extract_lower_conditioned(seq, mu, self.eps,
                                                     tol=self.tol)
        elif self.side == "upper":
            self.result_ = extract_upper_conditioned(
                seq, mu, self.eps, v=self.v, v_prime=self.v_prime,
                tol=self.tol,
            )
        else:
            raise ValueError("side must be 'lower' or 'upper'")
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        seq = check_ball_sequence(X)
        return seq.subsequence(self.result_.indices)


class RelevanceClassifier(BaseEstimator):
    """Label balls thin/fat/neutral against the |B|^(dim +/- eps) envelope."""

    def __init__(self, measure=None, eps=0.1, v=0.5, tol=1e-9):
        self.measure = measure
        self.eps = eps
        self.v = v
        self.tol = tol

    def fit(self, X, y=None):
        seq = check_ball_sequence(X)
        mu = check_measure(self.measure, seq.dim)
        self.report_ = classify_relevance(seq, mu, self.eps, self.v,
                                          tol=self.tol)
        self.labels_ = self.predict(seq)
        return self

    def predict(self, X):
        seq = check_ball_sequence(X)
        mu = check_measure(self.measure, seq.dim)
        report = classify_relevance(seq, mu, self.eps, self.v, gs=[0],
                                    tol=self.tol)
        labels = np.array(["neutral"] * len(seq), dtype=object)
        labels[report.thin_indices] = "thin"
        labels[report.fat_indices] = "fat"
        return labels


class RedundancyProfiler(BaseEstimator):
    """Profile per-scale family counts J_k of a ball sequence."""

    def __init__(self, k_max=12, k_min=None):
        self.k_max = k_max
        self.k_min = k_min

    def fit(self, X, y=None):
        seq = check_ball_sequence(X)
        self.report_ = weak_redundancy_report(seq, self.k_max, self.k_min)
        self.slope_tail_ = self.report_.slope_tail
        return self


class CriticalExponentEstimator(BaseEstimator):
    """Estimate the limsup-set dimension from tail cover-cost sums.

    mode='ball' contracts radii by delta, mode='rect' uses the anisotropic
    rectangle cost.  When a measure is supplied the closed-form prediction
    is attached for comparison.
    """

    def __init__(self, measure=None, mode="ball", delta=1.0, tau=None,
                 n0=None, bisect_tol=1e-3):
        self.measure = measure
        self.mode = mode
        self.delta = delta
        self.tau = tau
        self.n0 = n0
        self.bisect_tol = bisect_tol

    def fit(self, X, y=None):
        if isinstance(X, CoverCostTable):
            table = X
        else:
            seq = check_ball_sequence(X)
            table = CoverCostTable.from_sequence(seq)
        prediction = None
        formula = ""
        if self.measure is not None:
            dim_mu = measure_dimension(self.measure)
            if self.mode == "rect":
                prediction = predict_rect_dim(dim_mu, self.tau)
                formula = "min_i (dim+sum_(j<=i)(tau_i-tau_j))/tau_i"
            else:
                prediction = predict_shrunk_ball_dim(dim_mu, self.delta)
                formula = "dim/delta"
        self.report_ = natural_cover_critical_exponent(
            table, mode=self.mode, delta=self.delta, tau=self.tau,
            n0=self.n0, prediction=prediction, prediction_formula=formula,
            bisect_tol=self.bisect_tol,
        )
        self.estimate_ = self.report_.estimate
        self.prediction_ = prediction
        return self
