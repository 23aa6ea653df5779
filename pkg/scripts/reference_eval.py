"""Evaluate on a real dataset and compare with published reference numbers.

Expects one directory per scene holding four frames tagged ``_000 _045 _090
_135`` and a ground truth ``*_gt.*``.

    python scripts/reference_eval.py DATASET_DIR [--out results.csv] [--threads N]
"""
import argparse
from pathlib import Path

from polarsep import SeparationParams, separate
from polarsep.imagestack import find_stack_files, load_stack, read_image
from polarsep.metrics import aggregate, evaluate, write_csv

REFERENCE = {"psnr_db": 32.097, "ssim": 0.877, "ca_db": 24.909, "hue_sd": 0.034}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dataset", type=Path)
    ap.add_argument("--out", type=Path, default=None)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    params = SeparationParams(threads=args.threads)
    reports = []
    for d in sorted(p for p in args.dataset.iterdir() if p.is_dir()):
        gts = sorted(d.glob("*_gt.*"))
        if not gts:
            print(f"skip {d.name}: no ground truth")
            continue
        res = separate(load_stack(find_stack_files(d)), params)
        rep = evaluate(res.diffuse, read_image(gts[0]), scene=d.name, params=params.to_dict())
        reports.append(rep)
        print(f"{d.name:<24}{rep.psnr_db:8.3f}{rep.ssim:8.4f}{rep.ca_db:8.3f}{rep.hue_sd:8.4f}")
    if not reports:
        raise SystemExit("no scenes found")
    mean = aggregate(reports)
    print("mean      " + "  ".join(f"{k} {mean[k]:.3f} (ref {v})" for k, v in REFERENCE.items()))
    if args.out:
        write_csv(reports, args.out, mean)


if __name__ == "__main__":
    main()
