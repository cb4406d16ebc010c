"""Monte Carlo orchestration: simulate studies under a methodology config,
sweep stability over document counts, and generate synthetic datasets."""

from __future__ import annotations

import configparser
import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .assignment import (
    AssignmentPlan,
    Grouping,
    LoadBalancing,
    build_plan,
    subsample_documents,
)
from .corpus import Bucket, RatingDataset, SegmentRating
from .errors import ConfigError, InvalidSpec
from .scoring import NormalizationScheme, ScoredStudy, normalize
from .stats import SignificanceMatrix, same_documents, significance_matrix, srp

DEFAULT_DOC_GRID = (10, 20, 40, 60, 90, 120, 150, 181)


class Resampling:
    PER_STUDY = "per_study"
    PER_50 = "per_50"


@dataclass(frozen=True)
class StudyConfig:
    """One evaluation methodology plus simulation sizes and seed."""

    n_documents: int
    grouping: Grouping = Grouping.PSXS
    balancing: LoadBalancing = field(default_factory=LoadBalancing.fully_balanced)
    normalization: NormalizationScheme = NormalizationScheme.UNNORMALIZED
    ratings_per_item: int = 1
    doc_resampling: str = Resampling.PER_50
    n_simulations: int = 250
    n_permutations: int = 500
    alpha: float = 0.05
    master_seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.n_documents < 1:
            raise ConfigError("n_documents must be >= 1")
        if self.n_simulations < 2:
            raise ConfigError("n_simulations must be >= 2")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError("alpha must be in (0, 1)")
        if self.ratings_per_item not in (1, 2):
            raise ConfigError("ratings_per_item must be 1 or 2")
        if self.doc_resampling not in (Resampling.PER_STUDY, Resampling.PER_50):
            raise ConfigError(f"unknown doc_resampling {self.doc_resampling!r}")

    @property
    def effective_documents(self) -> int:
        """Documents actually included: fixed budget halves double-rated studies."""
        if self.ratings_per_item == 2:
            return max(1, self.n_documents // 2)
        return self.n_documents


@dataclass
class SimulatedStudy:
    doc_subset: frozenset[str]
    plan: AssignmentPlan
    scored: ScoredStudy  # post-normalization


@dataclass
class RankingResult:
    means: dict[str, float]
    matrix: SignificanceMatrix


def select_ratings(ds: RatingDataset, plan: AssignmentPlan) -> ScoredStudy:
    """Pull the real ratings selected by an assignment plan into a study."""
    entries = []
    for (doc_id, system_id), raters in plan.assignments.items():
        n_segs = ds.documents[doc_id]
        for rater_id in sorted(raters):
            for seg in range(n_segs):
                rating = ds.ratings[(doc_id, seg, system_id, rater_id)]
                entries.append(
                    (doc_id, seg, system_id, rater_id, rating.score, rating.n_errors)
                )
    return ScoredStudy.from_entries(entries)


def simulate_study(
    ds: RatingDataset,
    config: StudyConfig,
    seed,
    doc_subset: Optional[frozenset[str]] = None,
) -> tuple[SimulatedStudy, RankingResult]:
    """Sample one study and rank its systems with significance testing.

    ``seed`` may be anything accepted by numpy's default_rng.  When
    ``doc_subset`` is given (fixed-document-set mode), subsampling is skipped.
    """
    rng = np.random.default_rng(seed)
    if doc_subset is None:
        doc_subset = subsample_documents(ds, config.effective_documents, rng)
    plan = build_plan(
        ds, doc_subset, config.grouping, config.balancing, config.ratings_per_item, rng
    )
    scored = normalize(select_ratings(ds, plan), config.normalization)
    matrix = significance_matrix(
        scored, config.alpha, config.n_permutations, rng, doc_set=doc_subset
    )
    means = dict(zip(matrix.systems, (float(m) for m in matrix.means)))
    return SimulatedStudy(doc_subset, plan, scored), RankingResult(means, matrix)


@dataclass
class SweepPoint:
    label: str
    config: StudyConfig
    n_documents: int
    srp: float
    n_pairs: int
    wall_time: float
    study_means: list[dict[str, float]]
    matrices: Optional[list[SignificanceMatrix]] = None


@dataclass
class SweepResult:
    points: list[SweepPoint]

    CSV_COLUMNS = (
        "label",
        "item_grouping",
        "load_balancing",
        "normalization",
        "ratings_per_item",
        "doc_resampling",
        "n_simulations",
        "n_permutations",
        "alpha",
        "seed",
        "n_documents",
        "srp",
        "n_pairs",
    )

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for point in self.points:
            cfg = point.config
            writer.writerow(
                [
                    point.label,
                    cfg.grouping.value,
                    str(cfg.balancing),
                    cfg.normalization.value,
                    cfg.ratings_per_item,
                    cfg.doc_resampling,
                    cfg.n_simulations,
                    cfg.n_permutations,
                    f"{cfg.alpha:g}",
                    cfg.master_seed,
                    point.n_documents,
                    f"{point.srp:.6f}",
                    point.n_pairs,
                ]
            )
        return out.getvalue()

    def to_json_obj(self, include_matrices: bool = False) -> dict:
        points = []
        for point in self.points:
            cfg = point.config
            entry = {
                "label": point.label,
                "config": {
                    "item_grouping": cfg.grouping.value,
                    "load_balancing": str(cfg.balancing),
                    "normalization": cfg.normalization.value,
                    "ratings_per_item": cfg.ratings_per_item,
                    "doc_resampling": cfg.doc_resampling,
                    "n_simulations": cfg.n_simulations,
                    "n_permutations": cfg.n_permutations,
                    "alpha": cfg.alpha,
                    "seed": cfg.master_seed,
                },
                "n_documents": point.n_documents,
                "srp": point.srp,
                "n_pairs": point.n_pairs,
                "wall_time_s": point.wall_time,
                "study_means": point.study_means,
            }
            if include_matrices and point.matrices is not None:
                entry["matrices"] = [
                    {
                        "systems": list(m.systems),
                        "means": [float(x) for x in m.means],
                        "sig": m.sig.astype(int).tolist(),
                        "better": m.better.astype(int).tolist(),
                    }
                    for m in point.matrices
                ]
            points.append(entry)
        return {"points": points}


_WORKER_DS: Optional[RatingDataset] = None


def _init_worker(ds: RatingDataset) -> None:
    global _WORKER_DS
    _WORKER_DS = ds


def _run_one(args):
    config, seed_key, doc_subset = args
    _, ranking = simulate_study(
        _WORKER_DS, config, np.random.SeedSequence(seed_key), doc_subset
    )
    return ranking


def run_sweep(
    ds: RatingDataset,
    configs: Sequence[StudyConfig],
    doc_count_grid: Optional[Sequence[int]] = None,
    threads: int = 1,
    keep_matrices: bool = True,
    progress: Optional[Callable[[str], None]] = None,
) -> SweepResult:
    """Run every config at every document count and score SRP per point.

    Per-study RNG streams are derived from (master_seed, config index, grid
    index, document-set index, study index), so output is identical for any
    worker count.
    """
    if doc_count_grid is None:
        doc_count_grid = [n for n in DEFAULT_DOC_GRID if n <= len(ds.documents)]
    points: list[SweepPoint] = []
    for ci, config in enumerate(configs):
        for gi, n_docs in enumerate(doc_count_grid):
            config_point = replace(config, n_documents=n_docs)
            start = time.perf_counter()
            tasks = []
            if config_point.doc_resampling == Resampling.PER_50:
                for si in range(config_point.n_simulations):
                    di = si // 50
                    tasks.append((config_point, (config.master_seed, ci, gi, di, si), di))
                docsets = {}
                for di in {t[2] for t in tasks}:
                    docset_rng = np.random.default_rng(
                        np.random.SeedSequence((config.master_seed, ci, gi, di))
                    )
                    docsets[di] = subsample_documents(
                        ds, config_point.effective_documents, docset_rng
                    )
                tasks = [(cfg, key, docsets[di]) for cfg, key, di in tasks]
                pair_filter = same_documents
            else:
                tasks = [
                    (config_point, (config.master_seed, ci, gi, si, si), None)
                    for si in range(config_point.n_simulations)
                ]
                pair_filter = None

            if threads > 1:
                with ProcessPoolExecutor(
                    max_workers=threads, initializer=_init_worker, initargs=(ds,)
                ) as pool:
                    rankings = list(pool.map(_run_one, tasks, chunksize=8))
            else:
                _init_worker(ds)
                rankings = [_run_one(task) for task in tasks]

            matrices = [r.matrix for r in rankings]
            value, n_pairs = srp(matrices, pair_filter)
            points.append(
                SweepPoint(
                    label=config.label or f"config{ci}",
                    config=config_point,
                    n_documents=n_docs,
                    srp=value,
                    n_pairs=n_pairs,
                    wall_time=time.perf_counter() - start,
                    study_means=[r.means for r in rankings],
                    matrices=matrices if keep_matrices else None,
                )
            )
            if progress is not None:
                progress(
                    f"{points[-1].label} n_docs={n_docs} srp={value:.4f} "
                    f"pairs={n_pairs} ({points[-1].wall_time:.1f}s)"
                )
    return SweepResult(points)


# ---------------------------------------------------------------------------
# Synthetic dataset generation


@dataclass(frozen=True)
class GeneratorSpec:
    """Controls for the synthetic rating-dataset generator.

    Scores follow harshness * max(0, base_doc + quality_sys + item noise +
    rater doc-preference) * lognormal observation noise, so zero-noise specs
    with unit harshness give identical ratings from all raters.
    """

    n_documents: int = 40
    segments_per_doc: int = 5
    n_systems: int = 6
    quality_range: tuple[float, float] = (0.0, 2.0)
    n_buckets: int = 2
    harshness: tuple[float, ...] = (1.0,)
    base_range: tuple[float, float] = (0.5, 1.5)
    item_noise_sigma: float = 0.0
    rater_noise_sigma: float = 0.0
    doc_preference_sigma: float = 0.0
    language_pair: str = "synthetic"

    def __post_init__(self):
        if self.n_documents < self.n_buckets or self.n_buckets < 1:
            raise InvalidSpec("need at least one document per bucket")
        if self.segments_per_doc < 1:
            raise InvalidSpec("segments_per_doc must be >= 1")
        if self.n_systems < 2:
            raise InvalidSpec("need at least 2 systems")
        if not self.harshness or any(h <= 0 for h in self.harshness):
            raise InvalidSpec("harshness factors must be positive")
        if any(
            s < 0
            for s in (self.item_noise_sigma, self.rater_noise_sigma, self.doc_preference_sigma)
        ):
            raise InvalidSpec("noise sigmas must be non-negative")


def generate_synthetic(spec: GeneratorSpec, rng) -> RatingDataset:
    """Build a fully valid score-only dataset with 3 ratings per item."""
    docs = [f"doc{d:03d}" for d in range(spec.n_documents)]
    systems = [f"sys{s:02d}" for s in range(spec.n_systems)]
    quality = np.linspace(*spec.quality_range, spec.n_systems)
    raters = [f"rater{r:02d}" for r in range(3 * spec.n_buckets)]
    harshness = np.array(
        [spec.harshness[r % len(spec.harshness)] for r in range(len(raters))]
    )

    buckets = []
    doc_chunks = np.array_split(np.arange(spec.n_documents), spec.n_buckets)
    for b, chunk in enumerate(doc_chunks):
        buckets.append(
            Bucket(
                f"b{b:03d}",
                frozenset(docs[d] for d in chunk),
                frozenset(raters[3 * b : 3 * b + 3]),
            )
        )

    base = rng.uniform(*spec.base_range, size=spec.n_documents)
    preference = (
        rng.normal(0.0, spec.doc_preference_sigma, size=(len(raters), spec.n_documents))
        if spec.doc_preference_sigma > 0
        else np.zeros((len(raters), spec.n_documents))
    )

    ratings: dict[tuple[str, int, str, str], SegmentRating] = {}
    for b, bucket in enumerate(buckets):
        bucket_raters = sorted(bucket.rater_ids)
        for doc_id in sorted(bucket.doc_ids):
            d = docs.index(doc_id)
            for s, system_id in enumerate(systems):
                item_noise = rng.normal(
                    0.0, spec.item_noise_sigma, size=spec.segments_per_doc
                )
                for rater_id in bucket_raters:
                    r = raters.index(rater_id)
                    obs_noise = (
                        np.exp(rng.normal(0.0, spec.rater_noise_sigma, size=spec.segments_per_doc))
                        if spec.rater_noise_sigma > 0
                        else np.ones(spec.segments_per_doc)
                    )
                    truth = base[d] + quality[s] + item_noise + preference[r, d]
                    scores = harshness[r] * np.maximum(truth, 0.0) * obs_noise
                    for seg in range(spec.segments_per_doc):
                        ratings[(doc_id, seg, system_id, rater_id)] = SegmentRating(
                            doc_id, seg, system_id, rater_id, None, float(scores[seg])
                        )

    ds = RatingDataset(
        language_pair=spec.language_pair,
        documents={d: spec.segments_per_doc for d in docs},
        systems=frozenset(systems),
        raters=frozenset(raters),
        buckets=tuple(buckets),
        ratings=ratings,
    )
    ds.validate()
    return ds


# ---------------------------------------------------------------------------
# Config file parsing (flat sectioned key-value format)


def _parse_balancing(value: str, tolerance: float) -> LoadBalancing:
    if value == "fully_balanced":
        return LoadBalancing.fully_balanced()
    if value.startswith("entropy_target:"):
        try:
            target = float(value.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"invalid load_balancing value {value!r}") from None
        return LoadBalancing.entropy_target(target, tolerance)
    raise ConfigError(f"invalid load_balancing value {value!r}")


def _study_from_section(section, defaults: dict, label: str) -> StudyConfig:
    values = dict(defaults)
    values.update(section)
    try:
        grouping = Grouping(values.get("item_grouping", "psxs"))
    except ValueError:
        raise ConfigError(f"invalid item_grouping {values.get('item_grouping')!r}") from None
    try:
        normalization = NormalizationScheme(values.get("normalization", "unnormalized"))
    except ValueError:
        raise ConfigError(f"invalid normalization {values.get('normalization')!r}") from None
    tolerance = float(values.get("entropy_tolerance", 0.03))
    balancing = _parse_balancing(values.get("load_balancing", "fully_balanced"), tolerance)
    try:
        return StudyConfig(
            n_documents=int(values.get("num_documents", 1)),
            grouping=grouping,
            balancing=balancing,
            normalization=normalization,
            ratings_per_item=int(values.get("ratings_per_item", 1)),
            doc_resampling=values.get("doc_resampling", Resampling.PER_50),
            n_simulations=int(values.get("n_simulations", 250)),
            n_permutations=int(values.get("n_permutations", 500)),
            alpha=float(values.get("alpha", 0.05)),
            master_seed=int(values.get("seed", 0)),
            label=label,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid study config value: {exc}") from None


def load_sweep_config(path) -> tuple[list[StudyConfig], Optional[list[int]]]:
    """Parse a sweep config: a [sweep] section with shared defaults and the
    document-count grid, plus one [study:NAME] section per methodology."""
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as handle:
        parser.read_file(handle)
    defaults = dict(parser.items("sweep")) if parser.has_section("sweep") else {}
    grid = None
    if "doc_counts" in defaults:
        try:
            grid = [int(x) for x in defaults.pop("doc_counts").split()]
        except ValueError:
            raise ConfigError("invalid doc_counts list") from None
    configs = []
    for name in parser.sections():
        if name == "study":
            label = "study"
        elif name.startswith("study:"):
            label = name.split(":", 1)[1]
        else:
            continue
        configs.append(_study_from_section(dict(parser.items(name)), defaults, label))
    if not configs:
        raise ConfigError("no [study:NAME] sections found")
    return configs, grid


def load_study_config(path) -> StudyConfig:
    """Parse a single-study config (first [study:NAME] or [study] section)."""
    configs, _ = load_sweep_config(path)
    return configs[0]


def load_generator_spec(path) -> GeneratorSpec:
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as handle:
        parser.read_file(handle)
    if not parser.has_section("generator"):
        raise ConfigError("generator spec needs a [generator] section")
    values = dict(parser.items("generator"))

    def get_float_pair(key, default):
        if key not in values:
            return default
        parts = values[key].split()
        if len(parts) != 2:
            raise ConfigError(f"{key} needs two numbers")
        return (float(parts[0]), float(parts[1]))

    try:
        return GeneratorSpec(
            n_documents=int(values.get("n_documents", 40)),
            segments_per_doc=int(values.get("segments_per_doc", 5)),
            n_systems=int(values.get("n_systems", 6)),
            quality_range=get_float_pair("quality_range", (0.0, 2.0)),
            n_buckets=int(values.get("n_buckets", 2)),
            harshness=tuple(float(h) for h in values.get("harshness", "1.0").split()),
            base_range=get_float_pair("base_range", (0.5, 1.5)),
            item_noise_sigma=float(values.get("item_noise_sigma", 0.0)),
            rater_noise_sigma=float(values.get("rater_noise_sigma", 0.0)),
            doc_preference_sigma=float(values.get("doc_preference_sigma", 0.0)),
            language_pair=values.get("language_pair", "synthetic"),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid generator spec value: {exc}") from None
