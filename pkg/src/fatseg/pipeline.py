"""Per-slice segmentation and volume-level orchestration."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from threadpoolctl import threadpool_limits

from . import crf
from .appearance import AppearanceParams, appearance_scores
from .boundary import CandidateBoundary, NoSubjectError, build_ray_fan, detect_transitions, extract_skin_contour
from .geometric import mad_scores
from .partition import HullPolygon, hull_or_none, partition_slice, quantify, QuantReport
from .preprocess import PreprocessParams, preprocess_slice
from .volume_io import MaskGrid, VolumeGrid, extract_slice

METHODS = ("mad", "loop", "fusion", "ransac")


class PipelineError(RuntimeError):
    def __init__(self, z: int, stage: str, cause: Exception):
        super().__init__(f"slice {z}, stage {stage}: {cause}")
        self.z = z
        self.stage = stage
        self.__cause__ = cause


@dataclass(frozen=True)
class PipelineConfig:
    hu_low: float = -190.0
    hu_high: float = -30.0
    disk_radius: int = 10
    median_window: int = 3
    n_rays: int = 360
    ray_step: float = 0.5
    min_run: int = 2
    mad_threshold: float = 2.5
    tsne_perplexity: float | None = None
    tsne_iters: int = 1000
    loop_k: int = 20
    loop_lambda: float = 3.0
    loop_space: str = "embedding"
    loop_only_threshold: float = 0.5
    crf_w: float = 1.0
    crf_knn: int = 5
    crf_phi_scale: float | None = None
    crf_temperature: float = crf.SOFTMAX_TEMPERATURE
    ransac_tolerance: float = 3.0
    ransac_trials: int = 300
    seed: int = 0

    def __post_init__(self):
        self.preprocess_params()
        self.appearance_params()
        if self.n_rays < 8:
            raise ValueError("n_rays must be >= 8")
        if self.ray_step <= 0:
            raise ValueError("ray_step must be positive")
        if self.min_run < 1:
            raise ValueError("min_run must be >= 1")
        if self.mad_threshold <= 0:
            raise ValueError("mad_threshold must be positive")
        if self.crf_w < 0:
            raise ValueError("crf_w must be >= 0")
        if self.crf_knn < 1:
            raise ValueError("crf_knn must be >= 1")
        if self.crf_phi_scale is not None and self.crf_phi_scale <= 0:
            raise ValueError("crf_phi_scale must be positive or None")

    def preprocess_params(self) -> PreprocessParams:
        return PreprocessParams(self.hu_low, self.hu_high, self.disk_radius, self.median_window)

    def appearance_params(self) -> AppearanceParams:
        return AppearanceParams(self.tsne_perplexity, self.tsne_iters, self.loop_k,
                                self.loop_lambda, self.seed, self.loop_space)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_types(cls) -> dict[str, str]:
        return {f.name: f.type for f in fields(cls)}


def slice_seed(seed: int, z: int) -> int:
    """Seed for slice ``z``; depends only on (seed, z) so slice order is irrelevant."""
    return int(np.random.SeedSequence([int(seed), int(z)]).generate_state(1)[0])


@dataclass(eq=False)
class SliceResult:
    z: int
    labels: dict[str, np.ndarray]               # method -> (ny, nx) uint8 labels
    candidates: CandidateBoundary | None = None  # all hypotheses with phi and pi
    inliers: dict[str, np.ndarray] = field(default_factory=dict)
    hulls: dict[str, HullPolygon | None] = field(default_factory=dict)
    embedding: np.ndarray | None = None
    crf_labels: np.ndarray | None = None
    graph: crf.FusionGraph | None = None
    crf_energy: float | None = None
    flagged: bool = False
    seconds: float = 0.0


def _fat_only(fat, methods, z, seconds=0.0, candidates=None):
    labels = {m: partition_slice(fat, None) for m in methods}
    return SliceResult(z, labels, candidates, hulls={m: None for m in methods}, flagged=True, seconds=seconds)


def segment_slice(slice_hu: np.ndarray, config: PipelineConfig | None = None, z: int = 0,
                  methods=("fusion",)) -> SliceResult:
    """Run every stage on one slice and partition the fat once per method.

    Methods: ``mad`` (hull of MAD inliers), ``loop`` (MAD inliers whose
    appearance score is below ``loop_only_threshold``), ``fusion`` (CRF
    inliers) and ``ransac`` (ellipse-consensus inliers).
    """
    cfg = config or PipelineConfig()
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    t0 = time.perf_counter()
    seed = slice_seed(cfg.seed, z)
    stage = "preprocess"
    try:
        with threadpool_limits(1):
            fat, smooth = preprocess_slice(slice_hu, cfg.preprocess_params())
            stage = "boundary_init"
            try:
                contour = extract_skin_contour(smooth)
            except NoSubjectError:
                return _fat_only(fat, methods, z, time.perf_counter() - t0)
            fan = build_ray_fan(contour, cfg.n_rays, cfg.ray_step)
            cands = detect_transitions(fan, smooth, cfg.min_run)
            if len(cands) < 3:
                return _fat_only(fat, methods, z, time.perf_counter() - t0, cands)

            stage = "geo_outliers"
            mad = mad_scores(cands, cfg.mad_threshold)
            stage = "app_outliers"
            app = appearance_scores(slice_hu, cands.position, cfg.appearance_params(), seed=seed)
            cands = cands.with_scores(phi=mad.phi, pi=app.pi)

            inliers = {"mad": mad.inlier, "loop": mad.inlier & (app.pi < cfg.loop_only_threshold)}
            res = SliceResult(z, {}, cands, inliers,
                              embedding=None if app.embedding is None else app.embedding.points)
            if "fusion" in methods:
                stage = "crf_fusion"
                unary = crf.unary_potentials(mad.phi, app.pi, seed=seed, phi_scale=cfg.crf_phi_scale,
                                             temperature=cfg.crf_temperature)
                feats = crf.fusion_features(app.hog, cands.radial_distance, cands.angle)
                edges = crf.build_edges(feats, cfg.crf_knn)
                graph = crf.FusionGraph(unary, edges, crf.edge_scales(feats, edges), cfg.crf_w)
                lab = crf.minimize_energy(graph)
                inliers["fusion"] = lab.labels == crf.INLIER
                res.crf_labels, res.crf_energy, res.graph = lab.labels, lab.energy, graph
            if "ransac" in methods:
                stage = "ransac"
                from .evaluate import ransac_baseline
                inliers["ransac"] = ransac_baseline(cands, cfg.ransac_tolerance, cfg.ransac_trials, seed)

            stage = "partition"
            for m in methods:
                hull = hull_or_none(cands.position[inliers[m]])
                res.hulls[m] = hull
                res.labels[m] = partition_slice(fat, hull)
            res.flagged = any(res.hulls[m] is None for m in methods)
    except Exception as exc:
        raise PipelineError(z, stage, exc) from exc
    res.seconds = time.perf_counter() - t0
    return res


def _worker(args):
    slice_hu, cfg, z, methods = args
    return segment_slice(slice_hu, cfg, z, methods)


def run_slices(vol: VolumeGrid, config: PipelineConfig | None = None, workers: int = 1,
               methods=("fusion",)) -> list[SliceResult]:
    """Segment every slice; results are ordered by slice index whatever the
    worker count."""
    cfg = config or PipelineConfig()
    jobs = [(np.array(extract_slice(vol, z)), cfg, z, tuple(methods)) for z in range(vol.data.shape[0])]
    if workers <= 1:
        results = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs))
    return sorted(results, key=lambda r: r.z)


def assemble(vol: VolumeGrid, results: list[SliceResult], method: str = "fusion") -> MaskGrid:
    data = np.stack([r.labels[method] for r in results])
    return MaskGrid(data, vol.spacing)


def segment_volume(vol: VolumeGrid, config: PipelineConfig | None = None, workers: int = 1,
                   method: str = "fusion") -> tuple[MaskGrid, QuantReport, list[SliceResult]]:
    cfg = config or PipelineConfig()
    results = run_slices(vol, cfg, workers, (method,))
    mask = assemble(vol, results, method)
    report = quantify(mask, [r.z for r in results if r.flagged], cfg.to_dict(), [r.seconds for r in results])
    return mask, report, results
