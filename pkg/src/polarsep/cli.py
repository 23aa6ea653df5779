"""Command line front end: ``polarsep {separate,evaluate,synth,inspect}``.

Every option can also be given in a JSON config file (``--config`` or the
``POLARSEP_CONFIG`` environment variable) under its long-option name with
dashes replaced by underscores. Command-line values win over the file.

Exit codes: 0 success, 1 user or input error, 2 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .imagestack import (SONY_MOSAIC, DEFAULT_MOSAIC, StackError, find_stack_files,
                         load_mosaic, load_stack, read_image, save_image)
from .metrics import aggregate, evaluate, write_csv
from .optimizer import SOLVERS, SeparationParams, prepare, separate, write_history_csv
from .rpca import NumericError, pgm_apply
from .synth import FIXTURES, SpecError, SynthSpec, render_scene, standard_scenes, write_scene
from .trs import degree_of_polarization

log = logging.getLogger("polarsep")

CONFIG_ENV = "POLARSEP_CONFIG"
DUMP_KEYS = ("i_c", "i_sv", "alpha", "dop", "raw_d", "raw_s", "chroma", "clusters", "fD")
MOSAICS = {"default": DEFAULT_MOSAIC, "sony": SONY_MOSAIC}
PARAM_FIELDS = [f.name for f in dataclasses.fields(SeparationParams)]


class UserError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument handling

def _add_input(p):
    p.add_argument("--input", nargs="+", help="stack directory, or four angle-tagged images")
    p.add_argument("--scene", help="scene prefix when a directory holds several stacks")
    p.add_argument("--mosaic", help="single raw 2x2 polarization mosaic instead of --input")
    p.add_argument("--mosaic-pattern", choices=sorted(MOSAICS))
    p.add_argument("--angles", type=int, nargs=4, metavar="DEG",
                   help="angles of the --input files, overriding filename tags")
    p.add_argument("--gamma", type=float, help="decode gamma applied after reading")


def _add_params(p):
    defaults = SeparationParams()
    p.add_argument("--rho-pol0", type=float, help=f"default {defaults.rho_pol0}")
    p.add_argument("--rho0", type=float, help=f"default {defaults.rho0}")
    p.add_argument("--penalty-growth", type=float, help=f"default {defaults.penalty_growth}")
    p.add_argument("--max-iter", type=int, help=f"default {defaults.max_iter}")
    p.add_argument("--epsilon", type=float, help=f"default {defaults.epsilon}")
    p.add_argument("--t", type=float, help=f"chromatic threshold, default {defaults.t}")
    p.add_argument("--tau-s", type=float, help=f"default {defaults.tau_s}")
    p.add_argument("--solver", choices=SOLVERS)
    p.add_argument("--consistent-output", action="store_true", default=None)
    p.add_argument("--min-cluster-size", type=int)
    p.add_argument("--rpca-max-iter", type=int)
    p.add_argument("--rpca-tol", type=float)
    p.add_argument("--rpca-mu-growth", type=float)
    p.add_argument("--threads", type=int, help="worker threads, default all cores")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polarsep", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("separate", help="split a polarized stack into diffuse and specular")
    _add_input(p)
    _add_params(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("png", "tif"), help="image format, default png")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), help="default 16")
    p.add_argument("--config")

    p = sub.add_parser("evaluate", help="score diffuse predictions against ground truth")
    p.add_argument("--pred", help="predicted diffuse image or directory")
    p.add_argument("--gt", help="ground-truth image or directory")
    p.add_argument("--scene")
    p.add_argument("--out", help="write the JSON report (and CSV in directory mode) here")
    p.add_argument("--config")

    p = sub.add_parser("synth", help="render a synthetic scene")
    p.add_argument("--spec", help="scene description JSON")
    p.add_argument("--fixture", help="built-in scene: " + ", ".join(FIXTURES))
    p.add_argument("--size", type=int, help="fixture size, default 256")
    p.add_argument("--out", help="output directory")
    p.add_argument("--name", help="file prefix, default the scene name")
    p.add_argument("--bit-depth", type=int, choices=(8, 16))
    p.add_argument("--config")

    p = sub.add_parser("inspect", help="dump intermediate maps as images")
    _add_input(p)
    _add_params(p)
    p.add_argument("--dump", nargs="+", help="any of: " + ", ".join(DUMP_KEYS))
    p.add_argument("--out", help="output directory")
    p.add_argument("--config")
    return ap


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise UserError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UserError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UserError(f"config file {path} must hold a JSON object")
    return cfg


def effective_options(args: argparse.Namespace) -> dict:
    """Merge the config file under the parsed arguments (arguments win)."""
    given = {k: v for k, v in vars(args).items() if v is not None}
    path = given.get("config") or os.environ.get(CONFIG_ENV)
    merged = {}
    if path:
        cfg = load_config(path)
        known = set(vars(args))
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UserError(f"unknown config key(s) for {args.command}: {', '.join(unknown)}")
        merged.update({k: v for k, v in cfg.items() if v is not None})
        merged["config"] = str(path)
    merged.update(given)
    return merged


def params_from(opts: dict) -> SeparationParams:
    try:
        return SeparationParams.from_dict({k: opts[k] for k in PARAM_FIELDS if k in opts})
    except (TypeError, ValueError) as exc:
        raise UserError(str(exc)) from None


def _require(opts, key, flag=None):
    if key not in opts:
        raise UserError(f"missing required option --{(flag or key).replace('_', '-')}")
    return opts[key]


def load_input(opts: dict):
    gamma = opts.get("gamma")
    if "mosaic" in opts:
        return load_mosaic(opts["mosaic"], MOSAICS[opts.get("mosaic_pattern", "default")], gamma)
    src = _require(opts, "input")
    src = [src] if isinstance(src, str) else list(src)
    if len(src) == 1 and Path(src[0]).is_dir():
        return load_stack(find_stack_files(src[0], opts.get("scene")), gamma=gamma)
    return load_stack(src, opts.get("angles"), gamma)


# ---------------------------------------------------------------------------
# commands

def cmd_separate(opts: dict) -> int:
    out = Path(_require(opts, "out"))
    params = params_from(opts)
    stack = load_input(opts)
    result = separate(stack, params)
    ext = opts.get("format", "png")
    depth = opts.get("bit_depth", 16)

    out.mkdir(parents=True, exist_ok=True)
    clamped = save_image(result.diffuse, out / f"diffuse.{ext}", depth)
    clamped += save_image(result.specular, out / f"specular.{ext}", depth)
    report = result.report()
    report["config"] = {k: v for k, v in opts.items() if k != "command"}
    report["config"]["params"] = params.to_dict()
    report["output_clamped_values"] = clamped
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, default=_json_default)
    write_history_csv(result.history, out / "residuals.csv")
    print(f"{result.stop_reason} after {result.iterations} iterations, "
          f"{result.n_clusters} clusters -> {out}")
    return 0


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


IMAGE_EXTS = (".png", ".tif", ".tiff", ".bmp", ".ppm")


def _gt_files(gt_dir: Path) -> dict:
    out = {}
    for p in sorted(gt_dir.iterdir()):
        if p.suffix.lower() in IMAGE_EXTS:
            scene = p.stem[:-3] if p.stem.endswith("_gt") else p.stem
            out[scene] = p
    return out


def _pred_file(pred_dir: Path, scene: str) -> Path:
    for cand in [pred_dir / scene / f"diffuse{e}" for e in IMAGE_EXTS] + \
                [pred_dir / f"{scene}_diffuse{e}" for e in IMAGE_EXTS] + \
                [pred_dir / f"{scene}{e}" for e in IMAGE_EXTS]:
        if cand.is_file():
            return cand
    raise UserError(f"no prediction for scene {scene!r} in {pred_dir}")


def cmd_evaluate(opts: dict) -> int:
    pred = Path(_require(opts, "pred"))
    gt = Path(_require(opts, "gt"))
    if not gt.exists():
        raise UserError(f"ground truth not found: {gt}")
    if not pred.exists():
        raise UserError(f"prediction not found: {pred}")

    if gt.is_dir():
        if not pred.is_dir():
            raise UserError("--pred must be a directory when --gt is")
        scenes = _gt_files(gt)
        if not scenes:
            raise UserError(f"no ground-truth images in {gt}")
        reports = [evaluate(read_image(_pred_file(pred, s)), read_image(p), scene=s)
                   for s, p in scenes.items()]
        mean = aggregate(reports)
        doc = {"scenes": [dataclasses.asdict(r) for r in reports], "mean": mean}
        text = json.dumps(doc, indent=2)
        if "out" in opts:
            out = Path(opts["out"])
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text)
            write_csv(reports, out.with_suffix(".csv"), mean)
    else:
        rep = evaluate(read_image(pred), read_image(gt), scene=opts.get("scene", gt.stem))
        text = rep.to_json()
        if "out" in opts:
            Path(opts["out"]).parent.mkdir(parents=True, exist_ok=True)
            Path(opts["out"]).write_text(text)
    print(text)
    return 0


def cmd_synth(opts: dict) -> int:
    out = Path(_require(opts, "out"))
    if "spec" in opts:
        spec = SynthSpec.load(opts["spec"])
    elif "fixture" in opts:
        scenes = standard_scenes(opts.get("size", 256))
        if opts["fixture"] not in scenes:
            raise UserError(f"unknown fixture {opts['fixture']!r}; choose from {', '.join(scenes)}")
        spec = scenes[opts["fixture"]]
    else:
        raise UserError("give --spec or --fixture")
    scene = render_scene(spec)
    name = opts.get("name", spec.name)
    files = write_scene(scene, out, name, opts.get("bit_depth", 16))
    spec.save(out / f"{name}_spec.json")
    print(json.dumps(files, indent=2))
    return 0


def _gray(x):
    return np.repeat(np.asarray(x, dtype=np.float64)[..., None], 3, axis=-1)


def cluster_colors(labels: np.ndarray, seed: int = 0) -> np.ndarray:
    k = int(labels.max()) + 1
    rng = np.random.default_rng(seed)
    palette = rng.integers(32, 256, size=(k, 3)) / 255.0
    return palette[labels]


def cmd_inspect(opts: dict) -> int:
    keys = _require(opts, "dump")
    keys = [keys] if isinstance(keys, str) else list(keys)
    bad = [k for k in keys if k not in DUMP_KEYS]
    if bad:
        raise UserError(f"unknown dump key(s) {', '.join(bad)}; valid keys: {', '.join(DUMP_KEYS)}")
    out = Path(_require(opts, "out"))
    params = params_from(opts)
    stack = load_input(opts)
    maps, raw, chro, _, clusters = prepare(stack, params)

    images = {}
    for k in keys:
        if k == "i_c":
            images[k] = maps.i_c
        elif k == "i_sv":
            images[k] = maps.i_sv
        elif k == "alpha":
            images[k] = maps.alpha / np.pi
        elif k == "dop":
            images[k] = degree_of_polarization(maps)
        elif k == "raw_d":
            images[k] = raw.raw_d
        elif k == "raw_s":
            images[k] = raw.raw_s
        elif k == "chroma":
            images[k] = chro.samples
        elif k == "clusters":
            images[k] = cluster_colors(clusters.labels)
        elif k == "fD":
            images[k] = pgm_apply(raw.raw_d, clusters, params.rpca_options(), params.threads).image
    out.mkdir(parents=True, exist_ok=True)
    for k, img in images.items():
        img = np.asarray(img)
        save_image(img if img.ndim == 3 else _gray(img), out / f"{k}.png", 16)
        print(out / f"{k}.png")
    return 0


COMMANDS = {"separate": cmd_separate, "evaluate": cmd_evaluate,
            "synth": cmd_synth, "inspect": cmd_inspect}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = effective_options(args)
        opts.pop("verbose", None)
        return COMMANDS[args.command](opts)
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numeric failure: {_one_line(exc)}", file=sys.stderr)
        return 2
    except (UserError, StackError, SpecError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        return 1


def _one_line(exc) -> str:
    msg = str(exc) or type(exc).__name__
    return " ".join(msg.split())


if __name__ == "__main__":
    sys.exit(main())
