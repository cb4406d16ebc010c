"""Statistical primitives: grouped permutation test, significance matrices,
significant-ranking-preservation, workload entropy, and rater agreement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import kendalltau

from .corpus import RatingDataset
from .errors import (
    EmptyWorkload,
    MismatchedDocuments,
    NoAdmissiblePairs,
    SystemSetMismatch,
    UnknownRater,
)
from .scoring import ScoredStudy

_REL_TOL = 1e-12


@dataclass
class SignificanceMatrix:
    """Pairwise comparison result for one study.

    ``better[i][j]`` means system i has a strictly lower (better) mean than j;
    ``sig[i][j]`` additionally requires the permutation test to reach alpha.
    """

    systems: tuple[str, ...]
    means: np.ndarray
    sig: np.ndarray
    better: np.ndarray
    alpha: float
    n_permutations: int
    doc_set: Optional[frozenset] = None

    def __post_init__(self):
        n = len(self.systems)
        assert self.sig.shape == (n, n) and self.better.shape == (n, n)

    def align_to(self, systems: Sequence[str]) -> "SignificanceMatrix":
        if tuple(systems) == self.systems:
            return self
        if set(systems) != set(self.systems):
            raise SystemSetMismatch(
                f"system sets differ: {sorted(systems)} vs {sorted(self.systems)}"
            )
        perm = np.array([self.systems.index(s) for s in systems])
        return SignificanceMatrix(
            tuple(systems),
            self.means[perm],
            self.sig[np.ix_(perm, perm)],
            self.better[np.ix_(perm, perm)],
            self.alpha,
            self.n_permutations,
            self.doc_set,
        )


def _sign_flip_p(doc_diffs: np.ndarray, n_segments: int, n_perm: int, rng) -> float:
    """Monte Carlo p-value for the grouped permutation test.

    Because both systems share the same documents and per-document segment
    counts, swapping one document's labels flips the sign of that document's
    score-sum difference, so the test reduces to random sign flips.
    """
    observed = abs(float(doc_diffs.sum())) / n_segments
    signs = rng.integers(0, 2, size=(n_perm, len(doc_diffs))) * 2 - 1
    stats = np.abs(signs @ doc_diffs) / n_segments
    hits = int(np.sum(stats >= observed - _REL_TOL * (1.0 + observed)))
    return (1 + hits) / (1 + n_perm)


def permutation_test(
    scores_a: Mapping[str, Sequence[float]],
    scores_b: Mapping[str, Sequence[float]],
    n_perm: int,
    rng,
) -> float:
    """Two-sided grouped permutation test on per-document segment scores.

    The statistic is |mean(a) - mean(b)| over segments; each permutation
    independently swaps all of a document's segment labels between the two
    systems with probability 1/2.  The p-value uses the add-one estimator
    (1 + hits) / (1 + n_perm).
    """
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    if set(scores_a) != set(scores_b):
        raise MismatchedDocuments("document sets differ between the two systems")
    docs = sorted(scores_a)
    diffs = np.empty(len(docs))
    n_segments = 0
    for i, doc in enumerate(docs):
        a = np.asarray(scores_a[doc], dtype=np.float64)
        b = np.asarray(scores_b[doc], dtype=np.float64)
        if len(a) != len(b):
            raise MismatchedDocuments(f"segment counts differ for document {doc}")
        diffs[i] = a.sum() - b.sum()
        n_segments += len(a)
    if n_segments == 0:
        raise MismatchedDocuments("no segments to test")
    return _sign_flip_p(diffs, n_segments, n_perm, rng)


def significance_matrix(
    study: ScoredStudy, alpha: float, n_perm: int, rng, doc_set: Optional[frozenset] = None
) -> SignificanceMatrix:
    """Run the grouped permutation test for every system pair of a study."""
    n_sys = len(study.systems)
    if n_sys < 2:
        raise ValueError("need at least 2 systems")
    eff_sys, eff_doc, _, eff = study.effective_scores()
    n_docs = len(study.docs)
    sums = np.zeros((n_sys, n_docs))
    counts = np.zeros((n_sys, n_docs), dtype=np.intp)
    np.add.at(sums, (eff_sys, eff_doc), eff)
    np.add.at(counts, (eff_sys, eff_doc), 1)
    totals = counts.sum(axis=1)
    means = sums.sum(axis=1) / totals

    sig = np.zeros((n_sys, n_sys), dtype=bool)
    better = np.zeros((n_sys, n_sys), dtype=bool)
    for i in range(n_sys):
        for j in range(i + 1, n_sys):
            if not np.array_equal(counts[i], counts[j]):
                raise MismatchedDocuments(
                    f"systems {study.systems[i]} and {study.systems[j]} cover "
                    "different segments"
                )
            p = _sign_flip_p(sums[i] - sums[j], int(totals[i]), n_perm, rng)
            if means[i] < means[j]:
                better[i, j] = True
                sig[i, j] = p <= alpha
            elif means[j] < means[i]:
                better[j, i] = True
                sig[j, i] = p <= alpha
    return SignificanceMatrix(
        study.systems, means, sig, better, alpha, n_perm,
        doc_set if doc_set is not None else frozenset(study.docs),
    )


def sr(e1: SignificanceMatrix, e2: SignificanceMatrix) -> int:
    """1 iff every significant pair of e1 is directionally preserved in e2.

    Vacuously 1 when e1 has no significant pairs.
    """
    e2 = e2.align_to(e1.systems)
    return 0 if np.any(e1.sig & ~e2.better) else 1


def srp(
    studies: Sequence[SignificanceMatrix],
    pair_filter: Optional[Callable[[SignificanceMatrix, SignificanceMatrix], bool]] = None,
) -> tuple[float, int]:
    """Mean of sr over admissible ordered study pairs; returns (value, n_pairs)."""
    if len(studies) < 2:
        raise NoAdmissiblePairs("need at least 2 studies")
    total = 0
    n_pairs = 0
    for i, e1 in enumerate(studies):
        for j, e2 in enumerate(studies):
            if i == j:
                continue
            if pair_filter is not None and not pair_filter(e1, e2):
                continue
            total += sr(e1, e2)
            n_pairs += 1
    if n_pairs == 0:
        raise NoAdmissiblePairs("no ordered study pair passes the filter")
    return total / n_pairs, n_pairs


def same_documents(e1: SignificanceMatrix, e2: SignificanceMatrix) -> bool:
    return e1.doc_set is not None and e1.doc_set == e2.doc_set


def normalized_entropy(workload: Mapping[str, int] | Sequence[float], pool_size: int) -> float:
    """Entropy of the workload distribution over the full rater pool,
    normalized by log(pool_size); zero-count raters contribute 0."""
    if pool_size < 2:
        raise ValueError("pool_size must be >= 2")
    if isinstance(workload, Mapping):
        counts = np.asarray(list(workload.values()), dtype=np.float64)
    else:
        counts = np.asarray(workload, dtype=np.float64)
    if (counts < 0).any():
        raise EmptyWorkload("negative workload count")
    total = counts.sum()
    if total <= 0:
        raise EmptyWorkload("total workload is zero")
    p = counts[counts > 0] / total
    value = float(-(p * np.log(p)).sum() / np.log(pool_size))
    return min(max(value, 0.0), 1.0)


def kendall_tau(means1: Mapping[str, float], means2: Mapping[str, float]) -> float:
    """Kendall's tau-b between two system score maps (ascending rankings)."""
    if set(means1) != set(means2):
        raise SystemSetMismatch("system sets differ")
    if len(means1) < 2:
        raise ValueError("need at least 2 systems")
    systems = sorted(means1)
    x = [means1[s] for s in systems]
    y = [means2[s] for s in systems]
    return float(kendalltau(x, y).statistic)


@dataclass
class AgreementReport:
    per_pair: dict[tuple[str, str], float]
    grand_mean: float
    skipped_pairs: list[tuple[str, str]] = field(default_factory=list)


def rater_agreement(ds: RatingDataset, granularity: str) -> AgreementReport:
    """Average Kendall's tau between rater pairs' system rankings.

    ``single_document``: mean over shared documents of per-document ranking tau.
    ``all_shared``: one tau from system means pooled over all shared documents.
    """
    if granularity not in ("single_document", "all_shared"):
        raise ValueError(f"unknown granularity {granularity!r}")
    systems = sorted(ds.systems)
    raters = sorted(ds.raters)
    # (rater, doc) -> per-system [sum, count] accumulators
    acc: dict[tuple[str, str], np.ndarray] = {}
    sys_pos = {s: i for i, s in enumerate(systems)}
    for (doc_id, _seg, system_id, rater_id), rating in ds.ratings.items():
        key = (rater_id, doc_id)
        if key not in acc:
            acc[key] = np.zeros((2, len(systems)))
        a = acc[key]
        a[0, sys_pos[system_id]] += rating.score
        a[1, sys_pos[system_id]] += 1

    shared_docs: dict[tuple[str, str], list[str]] = {}
    for bucket in ds.buckets:
        bucket_raters = sorted(bucket.rater_ids)
        for i, r1 in enumerate(bucket_raters):
            for r2 in bucket_raters[i + 1 :]:
                shared_docs.setdefault((r1, r2), []).extend(sorted(bucket.doc_ids))

    per_pair: dict[tuple[str, str], float] = {}
    skipped: list[tuple[str, str]] = []
    for i, r1 in enumerate(raters):
        for r2 in raters[i + 1 :]:
            docs = shared_docs.get((r1, r2), [])
            if not docs:
                skipped.append((r1, r2))
                continue
            if granularity == "single_document":
                taus = []
                for doc in docs:
                    m1 = acc[(r1, doc)][0] / acc[(r1, doc)][1]
                    m2 = acc[(r2, doc)][0] / acc[(r2, doc)][1]
                    tau = kendalltau(m1, m2).statistic
                    if not np.isnan(tau):
                        taus.append(tau)
                per_pair[(r1, r2)] = float(np.mean(taus)) if taus else float("nan")
            else:
                sums1 = np.zeros(len(systems))
                sums2 = np.zeros(len(systems))
                counts1 = np.zeros(len(systems))
                counts2 = np.zeros(len(systems))
                for doc in docs:
                    sums1 += acc[(r1, doc)][0]
                    counts1 += acc[(r1, doc)][1]
                    sums2 += acc[(r2, doc)][0]
                    counts2 += acc[(r2, doc)][1]
                per_pair[(r1, r2)] = float(
                    kendalltau(sums1 / counts1, sums2 / counts2).statistic
                )
    values = [v for v in per_pair.values() if not np.isnan(v)]
    grand = float(np.mean(values)) if values else float("nan")
    return AgreementReport(per_pair, grand, skipped)


@dataclass
class ScoreHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    median: float
    n: int


def rater_distribution(
    ds: RatingDataset, rater_id: str, bin_edges: Sequence[float]
) -> ScoreHistogram:
    """Histogram of one rater's segment-level scores."""
    if rater_id not in ds.raters:
        raise UnknownRater(f"unknown rater {rater_id!r}")
    scores = np.array(
        [r.score for r in ds.ratings.values() if r.rater_id == rater_id], dtype=np.float64
    )
    edges = np.asarray(bin_edges, dtype=np.float64)
    counts, edges = np.histogram(scores, bins=edges)
    return ScoreHistogram(edges, counts, float(scores.mean()), float(np.median(scores)), len(scores))
