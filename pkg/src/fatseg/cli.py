"""Command line entry point: ``fatseg segment|phantom|eval|dump-stages``.

Configuration is layered: built-in defaults, then a ``key=value`` file
(``--config``), then ``FATSEG_<KEY>`` environment variables, then flags.
Keys are the field names of :class:`PipelineConfig`; dashes and underscores
are interchangeable.

Exit codes: 0 success, 1 I/O error, 2 configuration error, 3 pipeline error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .evaluate import METHOD_NAMES, ablation_run, dice, format_table
from .phantom import PhantomParams, generate, suite, suite_params
from .pipeline import METHODS, PipelineConfig, PipelineError, segment_slice, segment_volume
from .volume_io import Label, VolumeFormatError, extract_slice, load_mask, load_volume, save_mask, save_volume

ENV_PREFIX = "FATSEG_"
EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_PIPELINE = 0, 1, 2, 3

# flags whose names differ from the config key
FLAG_ALIASES = {"loop_lambda": ["--lambda"]}

SAT_RGB = (0, 200, 0)
VAT_RGB = (220, 0, 0)
INLIER_RGB = (255, 255, 0)
OUTLIER_RGB = (0, 160, 255)


class ConfigError(ValueError):
    pass


# --- configuration ------------------------------------------------------------

def _key(name: str) -> str:
    return name.strip().lower().replace("-", "_")


def _convert(name: str, text: str):
    types = PipelineConfig.field_types()
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    t = str(types[name])
    text = text.strip()
    if "None" in t and text.lower() in ("", "none", "auto"):
        return None
    try:
        if t.startswith("int"):
            return int(text)
        if t.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as {t}") from None
    return text


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        k = _key(k)
        out[k] = _convert(k, v)
    return out


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    names = {f.name for f in fields(PipelineConfig)}
    out = {}
    for var, v in environ.items():
        if var.startswith(ENV_PREFIX):
            k = _key(var[len(ENV_PREFIX):])
            if k in names:
                out[k] = _convert(k, v)
    return out


def build_config(config_file=None, flags: dict | None = None, environ=None) -> PipelineConfig:
    values = {}
    if config_file:
        values.update(read_config_file(config_file))
    values.update(env_overrides(environ))
    for k, v in (flags or {}).items():
        if v is not None:
            values[k] = _convert(k, v)
    try:
        return PipelineConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", help="key=value configuration file")
    for f in fields(PipelineConfig):
        names = ["--" + f.name.replace("_", "-")] + FLAG_ALIASES.get(f.name, [])
        g.add_argument(*names, dest="cfg_" + f.name, metavar="V", default=None)


def _config_from_args(args) -> PipelineConfig:
    flags = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_")}
    return build_config(args.config, flags)


# --- overlay ------------------------------------------------------------------

def _gray(slice_hu, level=40.0, width=400.0) -> np.ndarray:
    lo = level - width / 2
    g = np.clip((np.asarray(slice_hu, dtype=float) - lo) / width, 0.0, 1.0)
    return np.floor(g * 255 + 0.5).astype(np.uint8)


def overlay_rgb(slice_hu, labels, points=None, inliers=None) -> np.ndarray:
    """RGB image: soft-tissue window, SAT green, VAT red, boundary points
    yellow (kept) or blue (rejected)."""
    g = _gray(slice_hu)
    rgb = np.repeat(g[:, :, None], 3, axis=2)
    labels = np.asarray(labels)
    if labels.shape != g.shape:
        raise ValueError("slice and mask shapes differ")
    rgb[labels == Label.SAT] = SAT_RGB
    rgb[labels == Label.VAT] = VAT_RGB
    if points is not None and len(points):
        pts = np.floor(np.asarray(points, dtype=float) + 0.5).astype(int)
        keep = np.ones(len(pts), bool) if inliers is None else np.asarray(inliers, bool)
        ny, nx = g.shape
        ok = (pts[:, 0] >= 0) & (pts[:, 0] < nx) & (pts[:, 1] >= 0) & (pts[:, 1] < ny)
        for (x, y), k in zip(pts[ok], keep[ok]):
            rgb[y, x] = INLIER_RGB if k else OUTLIER_RGB
    return rgb


def emit_overlay(slice_hu, labels, points, path, inliers=None) -> Path:
    """Write a binary PPM (P6) overlay."""
    rgb = overlay_rgb(slice_hu, labels, points, inliers)
    path = Path(path)
    ny, nx = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())
    return path


# --- stage dumps --------------------------------------------------------------

def write_stage_csvs(res, outdir: Path, prefix: str = "") -> list[Path]:
    """Candidate table (positions, scores, embedding, per-method inliers,
    unaries, CRF label) and the CRF edge list."""
    written = []
    c = res.candidates
    if c is None or len(c) == 0:
        return written
    n = len(c)
    emb = res.embedding if res.embedding is not None else np.full((n, 2), np.nan)
    unary = res.graph.unary if res.graph is not None else np.full((n, 2), np.nan)
    methods = sorted(res.inliers)
    path = outdir / f"{prefix}candidates.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "ray", "x", "y", "skin_x", "skin_y", "radial_distance", "angle",
                    "phi", "pi", "embed_x", "embed_y", "unary_inlier", "unary_outlier", "crf_label"]
                   + [f"inlier_{m}" for m in methods])
        rd, ang = c.radial_distance, c.angle
        for i in range(n):
            crf_label = "" if res.crf_labels is None else int(res.crf_labels[i])
            w.writerow([i, int(c.ray_index[i]), *map(repr, map(float, c.position[i])),
                        *map(repr, map(float, c.skin_point[i])), repr(float(rd[i])), repr(float(ang[i])),
                        repr(float(c.phi[i])), repr(float(c.pi[i])),
                        repr(float(emb[i, 0])), repr(float(emb[i, 1])),
                        repr(float(unary[i, 0])), repr(float(unary[i, 1])), crf_label]
                       + [int(res.inliers[m][i]) for m in methods])
    written.append(path)
    if res.graph is not None:
        path = outdir / f"{prefix}graph.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "scale", "weight"])
            for (i, j), s in zip(res.graph.edges.tolist(), res.graph.scale.tolist()):
                w.writerow([i, j, repr(s), repr(res.graph.w * s)])
        written.append(path)
    return written


# --- subcommands --------------------------------------------------------------

def cmd_segment(args) -> int:
    cfg = _config_from_args(args)
    vol = load_volume(args.volume)
    truth = load_mask(args.truth) if args.truth else None
    if truth is not None and not truth.matches(vol):
        raise VolumeFormatError("truth mask does not match the volume grid")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    mask, report, results = segment_volume(vol, cfg, args.workers, args.method)
    save_mask(mask, out / "mask.hdr")
    rep = report.to_dict()
    rep["method"] = args.method
    if truth is not None:
        rep["slice_dsc"] = [
            {"z": z, "sat": dice(mask.data[z], truth.data[z], Label.SAT),
             "vat": dice(mask.data[z], truth.data[z], Label.VAT)}
            for z in range(mask.data.shape[0])
        ]
        rep["dsc"] = {"sat": dice(mask.data, truth.data, Label.SAT),
                      "vat": dice(mask.data, truth.data, Label.VAT)}
    (out / "report.json").write_text(json.dumps(rep, indent=2) + "\n")
    for r in results:
        if args.dump:
            write_stage_csvs(r, out, f"slice{r.z:03d}_")
        if args.overlay:
            pts = None if r.candidates is None else r.candidates.position
            inl = r.inliers.get(args.method)
            emit_overlay(extract_slice(vol, r.z), r.labels[args.method], pts,
                         out / f"slice{r.z:03d}.ppm", inl)
    print(f"SAT {report.sat_ml:.3f} ml  VAT {report.vat_ml:.3f} ml  "
          f"({len(results)} slices, {len(report.flagged_slices)} flagged) -> {out}")
    return EXIT_OK


def cmd_dump_stages(args) -> int:
    cfg = _config_from_args(args)
    vol = load_volume(args.volume)
    nz = vol.data.shape[0]
    zs = range(nz) if args.slice is None else [args.slice]
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for z in zs:
        if not 0 <= z < nz:
            raise ConfigError(f"slice {z} out of range [0, {nz})")
        sl = extract_slice(vol, z)
        res = segment_slice(np.array(sl), cfg, z, METHODS)
        prefix = f"slice{z:03d}_"
        write_stage_csvs(res, out, prefix)
        n = 0 if res.candidates is None else len(res.candidates)
        for m in METHODS:
            pts = None if res.candidates is None else res.candidates.position
            emit_overlay(sl, res.labels[m], pts, out / f"{prefix}{m}.ppm", res.inliers.get(m))
        summary.append({
            "z": z, "candidates": n, "flagged": res.flagged, "seconds": res.seconds,
            "crf_energy": res.crf_energy,
            "inliers": {m: int(np.count_nonzero(v)) for m, v in res.inliers.items()},
        })
    (out / "stages.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"dumped {len(summary)} slice(s) -> {out}")
    return EXIT_OK


def cmd_phantom(args) -> int:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    if args.suite:
        for i, (vol, truth) in enumerate(suite(args.seed, args.noise)):
            save_volume(vol, out / f"case{i:02d}.hdr")
            save_mask(truth, out / f"case{i:02d}_truth.hdr")
        print(f"wrote {len(suite_params(args.seed))} cases -> {out}")
        return EXIT_OK
    try:
        p = PhantomParams(nx=args.size, ny=args.size, nz=args.nz, gap_count=args.gaps,
                          noise_sigma=args.noise, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.size != 256:
        k = args.size / 256.0
        p = replace(p, skin_a=p.skin_a * k, skin_b=p.skin_b * k, sat_lateral=p.sat_lateral * k,
                    sat_anterior=p.sat_anterior * k, sat_posterior=p.sat_posterior * k,
                    vat_blob_radius=(p.vat_blob_radius[0] * k, p.vat_blob_radius[1] * k))
    vol, truth = generate(p)
    save_volume(vol, out / "volume.hdr")
    save_mask(truth, out / "truth.hdr")
    print(f"wrote {out / 'volume.hdr'} and {out / 'truth.hdr'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    cases = suite(args.suite_seed, args.noise)
    rows, details = ablation_run(cases, cfg, args.workers, ("ransac", "mad", "loop", "fusion"))
    table = format_table(rows)
    (out / "eval_table.txt").write_text(table + "\n")
    payload = {
        "suite_seed": args.suite_seed, "noise_sigma": args.noise, "config": cfg.to_dict(),
        "rows": [r.__dict__ for r in rows],
        "cases": {METHOD_NAMES[m]: d for m, d in details.items()},
    }
    (out / "eval.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fatseg", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment a volume into SAT/VAT")
    p.add_argument("volume", help="volume header (.hdr)")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--truth", help="ground-truth mask header; adds DSC to the report")
    p.add_argument("--method", choices=METHODS, default="fusion")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump", action="store_true", help="write per-slice candidate and graph CSVs")
    p.add_argument("--overlay", action="store_true", help="write per-slice PPM overlays")
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("dump-stages", help="run every stage on slices and dump intermediates")
    p.add_argument("volume")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--slice", type=int, default=None, help="single slice index (default: all)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_dump_stages)

    p = sub.add_parser("phantom", help="write synthetic volume(s) with ground truth")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--suite", action="store_true", help="write the 20-case battery")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--noise", type=float, default=15.0, help="noise sigma in HU")
    p.add_argument("--nz", type=int, default=2)
    p.add_argument("--size", type=int, default=256, help="in-plane grid size")
    p.add_argument("--gaps", type=int, default=2, help="number of wall gaps")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("eval", help="ablation tables on the phantom battery")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--suite-seed", type=int, default=42, help="battery seed")
    p.add_argument("--noise", type=float, default=15.0)
    p.add_argument("--workers", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (OSError, VolumeFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
