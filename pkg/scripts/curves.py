"""Complexity-distortion curves: sweep targets per clip and QP and write curves.csv."""

import argparse
from pathlib import Path

from decctl.core_types import ModelParams
from decctl.evaluation import CurvePoint, emit_curves
from decctl.pipeline import ClipSpec, plan_sequence, prepare_clip, run_planned
from decctl.solver import build_mix_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--params")
    ap.add_argument("--seeds", type=int, nargs="+", default=[1])
    ap.add_argument("--qps", type=int, nargs="+", default=[22, 27, 32, 37])
    ap.add_argument("--targets", type=float, nargs="+", default=[0.05, 0.1, 0.15, 0.2, 0.25, 0.3])
    ap.add_argument("--frames", type=int, default=17)
    ap.add_argument("--out", default="curves.csv")
    args = ap.parse_args()

    params = ModelParams.load(args.params) if args.params else ModelParams.table3()
    points = []
    for seed in args.seeds:
        for qp in args.qps:
            prep = prepare_clip(ClipSpec(seed=seed, qp=qp, frames=args.frames))
            table = build_mix_table(prep.seq.layout.N, params)
            for t in args.targets:
                plans, _ = plan_sequence(prep.seq, prep.saliency, t, params, table=table, cap_infeasible=True)
                res = run_planned(prep, plans, t)
                points.append(CurvePoint(prep.spec.label, qp, t, res.achieved, res.delta_psnr,
                                         res.delta_ew_psnr))
                print(f"{prep.spec.label} QP {qp} target {t:.2f}: {res.achieved:.4f}, "
                      f"{res.delta_psnr:.3f}/{res.delta_ew_psnr:.3f} dB")
    Path(args.out).write_text(emit_curves(points))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
