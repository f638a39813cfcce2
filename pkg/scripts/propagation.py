"""Per-frame propagation drop at one target, averaged over clips, printed by POC."""

import argparse

import numpy as np

from decctl.core_types import ModelParams
from decctl.evaluation import propagation_profile
from decctl.pipeline import ClipSpec, plan_sequence, prepare_clip
from decctl.solver import build_mix_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--params")
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--target", type=float, default=0.2)
    ap.add_argument("--frames", type=int, default=41)
    args = ap.parse_args()

    params = ModelParams.load(args.params) if args.params else ModelParams.table3()
    drops = []
    for seed in args.seeds:
        prep = prepare_clip(ClipSpec(seed=seed, frames=args.frames))
        table = build_mix_table(prep.seq.layout.N, params)
        plans, _ = plan_sequence(prep.seq, prep.saliency, args.target, params, table=table,
                                 cap_infeasible=True)
        prof = propagation_profile(prep.seq, plans, prep.reference)
        drops.append([prof[p] for p in range(args.frames)])
    mean = np.mean(drops, axis=0)
    intra = set(prep.seq.intra_pocs())
    for p, d in enumerate(mean):
        print(f"{p:3d} {'I' if p in intra else 'B'} {d:7.3f} dB")
    b = [d for p, d in enumerate(mean) if p not in intra]
    print(f"mean B-frame drop {np.mean(b):.3f} dB")


if __name__ == "__main__":
    main()
