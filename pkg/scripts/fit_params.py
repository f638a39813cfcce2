"""Fit model parameters on synthetic training clips at several QPs and print the fit report.

    python scripts/fit_params.py --seeds 101 102 --qps 22 27 32 37 --out params.json
"""

import argparse
import json
import time

from decctl.codec.training import TrainingSamples, collect_training_samples
from decctl.fitting import fit_model_params
from decctl.pipeline import ClipSpec, prepare_clip


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[101, 102])
    ap.add_argument("--qps", type=int, nargs="+", default=[22, 27, 32, 37])
    ap.add_argument("--frames", type=int, default=17)
    ap.add_argument("--width", type=int, default=832)
    ap.add_argument("--height", type=int, default=480)
    ap.add_argument("--out", default="params.json")
    args = ap.parse_args()

    t0 = time.perf_counter()
    samples = TrainingSamples()
    for seed in args.seeds:
        for qp in args.qps:
            prep = prepare_clip(ClipSpec(seed=seed, qp=qp, frames=args.frames,
                                         width=args.width, height=args.height))
            samples.extend(collect_training_samples(prep.seq, prep.saliency, seed=seed,
                                                    name=f"{prep.spec.label}@{qp}",
                                                    reference=prep.reference))
            print(f"seed {seed} QP {qp}: {len(samples.df)} DF samples so far")
    params, report = fit_model_params(samples.df, samples.mc, samples.mse)
    params.save(args.out)
    print(json.dumps(report.to_dict(), indent=2))
    if samples.df_srcc:
        print(f"mean DF SRCC {sum(samples.df_srcc) / len(samples.df_srcc):.3f}")
    print(f"wrote {args.out} in {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
