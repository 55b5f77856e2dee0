"""Dice, volume MAE, the RANSAC baseline and stage ablations."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .boundary import CandidateBoundary
from .partition import quantify, QuantReport
from .volume_io import Label, MaskGrid

METHOD_NAMES = {
    "ransac": "RANSAC",
    "mad": "Geometric MAD",
    "loop": "Appearance LoOP",
    "fusion": "CRF Fusion",
}


@dataclass
class EvalRow:
    method: str
    sat_dsc: float
    vat_dsc: float
    sat_mae_ml: float
    vat_mae_ml: float


def dice(a, b, label=None) -> float:
    """``2|A & B| / (|A| + |B|)``; two empty sets score 1.0.

    With ``label`` given, A and B are the pixels of ``a`` and ``b`` equal to it;
    otherwise the inputs are read as boolean masks.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if label is not None:
        a, b = a == label, b == label
    else:
        a, b = a.astype(bool), b.astype(bool)
    sa, sb = int(np.count_nonzero(a)), int(np.count_nonzero(b))
    if sa + sb == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(a & b)) / (sa + sb)


def mae_ml(pred: list[QuantReport], truth: list[QuantReport], label: Label) -> float:
    if len(pred) != len(truth):
        raise ValueError("prediction and truth lists differ in length")
    if not pred:
        raise ValueError("no cases")
    attr = {Label.SAT: "sat_ml", Label.VAT: "vat_ml"}[Label(label)]
    return float(np.mean([abs(getattr(p, attr) - getattr(t, attr)) for p, t in zip(pred, truth)]))


# --- RANSAC ellipse baseline -------------------------------------------------

def _conic_rows(x, y):
    return np.column_stack([x * x, x * y, y * y, x, y, np.ones_like(x)])


def fit_conic(points) -> np.ndarray | None:
    """Least-squares conic through the points (smallest singular vector)."""
    pts = np.asarray(points, dtype=float)
    _, _, vt = np.linalg.svd(_conic_rows(pts[:, 0], pts[:, 1]))
    c = vt[-1]
    A, B, C = c[0], c[1], c[2]
    if B * B - 4 * A * C >= 0:
        return None     # not an ellipse
    return c


def sampson_distance(conic, points) -> np.ndarray:
    """First-order geometric distance from points to the conic."""
    A, B, C, D, E, F = conic
    x, y = np.asarray(points, dtype=float).T
    val = A * x * x + B * x * y + C * y * y + D * x + E * y + F
    gx = 2 * A * x + B * y + D
    gy = B * x + 2 * C * y + E
    return np.abs(val) / np.maximum(np.hypot(gx, gy), 1e-300)


def ransac_baseline(candidates, tolerance: float = 3.0, trials: int = 300, seed: int = 0) -> np.ndarray:
    """Boolean inlier mask of the best ellipse consensus.

    Each trial fits an ellipse through 5 random candidates; the largest
    consensus set (distance <= ``tolerance`` px) is refitted once and its
    inliers returned.
    """
    pos = candidates.position if isinstance(candidates, CandidateBoundary) else candidates
    pts = np.asarray(pos, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 5:
        raise ValueError(f"RANSAC needs at least 5 points, got {n}")
    mu = pts.mean(axis=0)
    scale = float(np.sqrt(((pts - mu) ** 2).sum(axis=1).mean())) or 1.0
    norm = (pts - mu) / scale
    tol = tolerance / scale
    rng = np.random.default_rng(seed)
    best = np.zeros(n, dtype=bool)
    best_count = -1
    for _ in range(trials):
        idx = rng.choice(n, 5, replace=False)
        c = fit_conic(norm[idx])
        if c is None:
            continue
        inl = sampson_distance(c, norm) <= tol
        cnt = int(inl.sum())
        if cnt > best_count:
            best, best_count = inl, cnt
    if best_count >= 5:
        c = fit_conic(norm[best])
        if c is not None:
            refit = sampson_distance(c, norm) <= tol
            if refit.sum() >= best_count:
                best = refit
    return best


# --- ablations ---------------------------------------------------------------

def ablation_run(cases, config=None, workers: int = 1, methods=("ransac", "mad", "loop", "fusion")):
    """Run each method on every (volume, truth) case.

    Returns ``(rows, details)`` where ``details[method]`` holds per-case
    ``{"sat_dsc", "vat_dsc", "sat_ml", "vat_ml", "truth_sat_ml", "truth_vat_ml"}``.
    """
    from .pipeline import PipelineConfig, run_slices

    cfg = config or PipelineConfig()
    results = [run_slices(vol, cfg, workers, methods) for vol, _ in cases]
    return score_results(cases, results, methods)


def score_results(cases, results, methods=("ransac", "mad", "loop", "fusion")):
    """Tables from per-case slice results (as returned by ``run_slices``)."""
    from .pipeline import assemble

    details = {m: [] for m in methods}
    for (vol, truth), res in zip(cases, results):
        t_rep = quantify(truth)
        for m in methods:
            mask = assemble(vol, res, m)
            rep = quantify(mask)
            details[m].append({
                "sat_dsc": dice(mask.data, truth.data, Label.SAT),
                "vat_dsc": dice(mask.data, truth.data, Label.VAT),
                "sat_ml": rep.sat_ml, "vat_ml": rep.vat_ml,
                "truth_sat_ml": t_rep.sat_ml, "truth_vat_ml": t_rep.vat_ml,
            })
    rows = []
    for m in methods:
        d = details[m]
        rows.append(EvalRow(
            METHOD_NAMES[m],
            float(np.mean([c["sat_dsc"] for c in d])),
            float(np.mean([c["vat_dsc"] for c in d])),
            float(np.mean([abs(c["sat_ml"] - c["truth_sat_ml"]) for c in d])),
            float(np.mean([abs(c["vat_ml"] - c["truth_vat_ml"]) for c in d])),
        ))
    return rows, details


def format_table(rows: list[EvalRow]) -> str:
    head = f"{'Method':<24}{'SAT DSC':>10}{'VAT DSC':>10}{'SAT MAE ml':>13}{'VAT MAE ml':>13}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.method:<24}{100 * r.sat_dsc:>9.2f}%{100 * r.vat_dsc:>9.2f}%"
                     f"{r.sat_mae_ml:>13.4f}{r.vat_mae_ml:>13.4f}")
    return "\n".join(lines)


def rows_to_json(rows: list[EvalRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2)
