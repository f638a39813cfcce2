"""Control accuracy: plan each target on test clips and report achieved reduction, MAE and MRE.

    python scripts/control_accuracy.py --params params.json --targets 0.1 0.2 0.3
"""

import argparse

from decctl.core_types import ModelParams
from decctl.evaluation import control_error_report
from decctl.pipeline import ClipSpec, plan_sequence, prepare_clip, run_planned
from decctl.solver import build_mix_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--params", help="ModelParams JSON (default: reference constants)")
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--targets", type=float, nargs="+", default=[0.1, 0.2])
    ap.add_argument("--qp", type=int, default=32)
    ap.add_argument("--frames", type=int, default=33)
    args = ap.parse_args()

    params = ModelParams.load(args.params) if args.params else ModelParams.table3()
    clips = [prepare_clip(ClipSpec(seed=s, qp=args.qp, frames=args.frames)) for s in args.seeds]
    table = build_mix_table(clips[0].seq.layout.N, params)
    for t in args.targets:
        achieved = []
        for prep in clips:
            plans, _ = plan_sequence(prep.seq, prep.saliency, t, params, table=table, cap_infeasible=True)
            res = run_planned(prep, plans, t)
            achieved.append(res.achieved)
            print(f"{prep.spec.label} target {t:.2f}: achieved {res.achieved:.4f} "
                  f"(predicted {res.predicted:.4f}) dPSNR {res.delta_psnr:.3f} dEW-PSNR {res.delta_ew_psnr:.3f}")
        rep = control_error_report([t] * len(achieved), achieved)
        print(f"target {t:.2f}: MAE {rep.mae:.2f} pts, MRE {rep.mre:.1f}%")


if __name__ == "__main__":
    main()
