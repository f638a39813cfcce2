"""Command-line front end: ``decctl <command> [flags]``.

Exit codes: 0 success, 2 validation error, 3 infeasible target, 4 degenerate data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .codec.container import load_sequence, save_sequence
from .codec.gop import GopStructure
from .codec.ledger import CostProfile
from .codec.motion import MotionConfig
from .codec.proxy import decode_sequence, encode_sequence, frame_qp
from .codec.synthetic import CLIP_NAMES, generate_clip, read_raw_luma, write_raw_luma
from .codec.training import TrainingSamples, collect_training_samples
from .core_types import (FrameLayout, ModelParams, ValidationError, load_plans, qp_bucket,
                         read_saliency_file, save_plans, write_saliency_file)
from .evaluation import CurvePoint, control_error_report, emit_curves
from .fitting import DegenerateDataError, fit_model_params, write_samples_csv
from .io import atomic_write_json, atomic_write_text
from .pipeline import ClipSpec, PreparedClip, run_planned
from .solver import InfeasibleTargetError, MixTable, build_mix_table, plan_frame

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_DEGENERATE = 0, 2, 3, 4
COMMANDS = ("fit", "plan", "table", "simulate", "evaluate", "curves", "gen")


@dataclass
class RunConfig:
    command: str = ""
    width: int = 832
    height: int = 480
    frames: int = 33
    ctu_size: int = 64
    gop: int = 8
    intra_period: int = 32
    qp: list = field(default_factory=lambda: [32])
    targets: list = field(default_factory=list)
    saliency: Optional[str] = None
    params: Optional[str] = None
    params_init: Optional[str] = None
    plans: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    input: Optional[str] = None
    sequence: Optional[str] = None
    clip: list = field(default_factory=lambda: ["translating_texture"])
    count: int = 1
    n: Optional[int] = None
    search_range: int = 16
    max_df_samples: int = 3000
    per_bucket_h: bool = False
    out: str = "out"
    seed: int = 0
    wallclock: bool = False
    propagation: bool = True
    cost_profile: Optional[str] = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        for t in self.targets:
            if not 0.0 <= t < 1.0:
                raise ValidationError(f"target {t} outside [0, 1)")
        for name in ("width", "height", "frames", "ctu_size", "gop", "intra_period", "count"):
            if getattr(self, name) < 1:
                raise ValidationError(f"--{name.replace('_', '-')} must be positive")
        for c in self.clip:
            if c not in CLIP_NAMES:
                raise ValidationError(f"unknown clip {c!r}; choose from {CLIP_NAMES}")
        paths = [self.saliency, self.params, self.input, self.sequence, self.cost_profile,
                 *self.plans, *self.reports]
        for p in paths:
            if p is not None and not Path(p).exists():
                raise ValidationError(f"file not found: {p}")

    @property
    def layout(self) -> FrameLayout:
        return FrameLayout(self.width, self.height, self.ctu_size)

    @property
    def gop_structure(self) -> GopStructure:
        return GopStructure(self.gop, self.intra_period)

    def profile(self) -> CostProfile:
        return CostProfile.load(self.cost_profile) if self.cost_profile else CostProfile()


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    a = common.add_argument
    a("--config", help="JSON file of defaults; explicit flags win")
    a("--width", type=int)
    a("--height", type=int)
    a("--frames", type=int)
    a("--ctu-size", dest="ctu_size", type=int)
    a("--gop", type=int)
    a("--intra-period", dest="intra_period", type=int)
    a("--qp", type=_int_list, help="base QP or comma list")
    a("--targets", type=_float_list, help="comma list of reduction fractions")
    a("--saliency", help="saliency file: frame,w_0,...,w_N-1 per line")
    a("--params", help="ModelParams JSON")
    a("--params-init", dest="params_init", choices=["table3"])
    a("--plans", nargs="+", help="plan JSON files, one per target")
    a("--reports", nargs="+", help="simulate summary JSON files")
    a("--input", help="raw 8-bit luma video")
    a("--sequence", help="proxy sequence container")
    a("--clip", nargs="+", help=f"synthetic clip names {CLIP_NAMES}")
    a("--count", type=int, help="synthetic clips per name (seeds seed..seed+count-1)")
    a("--n", type=int, help="CTU count for table")
    a("--search-range", dest="search_range", type=int)
    a("--max-df-samples", dest="max_df_samples", type=int)
    a("--per-bucket-h", dest="per_bucket_h", action="store_true",
      help="also report a cubic per QP bucket (fit)")
    a("--out")
    a("--seed", type=int)
    a("--wallclock", action="store_true")
    a("--no-propagation", dest="propagation", action="store_false")
    a("--cost-profile", dest="cost_profile", help="JSON of operation weights")
    parser = argparse.ArgumentParser(prog="decctl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(argv: Optional[list[str]] = None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    merged: dict = {}
    if "config" in ns:
        path = Path(ns.pop("config"))
        if not path.exists():
            raise ValidationError(f"file not found: {path}")
        merged.update(json.loads(path.read_text()))
    merged.update(ns)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for key in ("qp", "targets"):
        if key in merged and not isinstance(merged[key], list):
            merged[key] = [merged[key]]
    cfg = RunConfig(**merged)
    cfg.validate()
    return cfg


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = list(rows[0])
    writer.writerow(cols)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def _target_tag(t: float) -> str:
    return f"{t:.2f}"


def _load_params(cfg: RunConfig) -> ModelParams:
    if cfg.params:
        return ModelParams.load(cfg.params)
    raise ValidationError("--params is required")


def _sources(cfg: RunConfig):
    """Yield (label, frames, saliency) for the configured input video or synthetic clips."""
    layout = cfg.layout
    if cfg.input:
        frames = read_raw_luma(cfg.input, cfg.width, cfg.height, cfg.frames)
        if not cfg.saliency:
            raise ValidationError("--input needs --saliency")
        sal = read_saliency_file(cfg.saliency, layout)
        missing = [i for i in range(len(frames)) if i not in sal]
        if missing:
            raise ValidationError(f"saliency file lacks frames {missing[:5]}")
        yield Path(cfg.input).stem, frames, sal
        return
    for name in cfg.clip:
        for seed in range(cfg.seed, cfg.seed + cfg.count):
            clip = generate_clip(name, cfg.width, cfg.height, cfg.frames, seed)
            yield f"{name}-s{seed}", clip.frames, clip.ctu_saliency(layout)


def _encode(cfg: RunConfig, frames, qp: int):
    return encode_sequence(frames, cfg.gop_structure, qp, ctu_size=cfg.ctu_size,
                           motion=MotionConfig(search_range=cfg.search_range))


def cmd_gen(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    for label, frames, sal in _sources(cfg):
        write_raw_luma(out / f"{label}.yuv", frames)
        write_saliency_file(out / f"{label}_saliency.csv", sal)
        for qp in cfg.qp:
            save_sequence(out / f"{label}_qp{qp}.sgcc", _encode(cfg, frames, qp))
        print(f"{label}: {len(frames)} frames, QPs {cfg.qp} -> {out}")
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    if cfg.params_init == "table3":
        ModelParams.table3().save(out / "params.json")
        print(f"wrote {out / 'params.json'} (reference constants)")
        return EXIT_OK
    profile = cfg.profile()
    samples = TrainingSamples()
    for label, frames, sal in _sources(cfg):
        for qp in cfg.qp:
            seq = _encode(cfg, frames, qp)
            got = collect_training_samples(seq, sal, profile=profile, max_df_samples=cfg.max_df_samples,
                                           seed=cfg.seed, name=f"{label}@{qp}")
            samples.extend(got)
            print(f"{label} QP {qp}: {len(got.df)} DF, {len(got.mc)} MC, {len(got.mse)} MSE samples")
    for msg in samples.excluded:
        print(f"excluded: {msg}", file=sys.stderr)
    params, report = fit_model_params(samples.df, samples.mc, samples.mse,
                                      per_bucket_h=cfg.per_bucket_h)
    params.save(out / "params.json")
    rep = report.to_dict()
    rep["df_srcc_mean"] = float(sum(samples.df_srcc) / len(samples.df_srcc)) if samples.df_srcc else None
    rep["excluded"] = samples.excluded
    rep["counts"] = {"df": len(samples.df), "mc": len(samples.mc), "mse": len(samples.mse)}
    atomic_write_json(out / "fit_report.json", rep)
    for kind, rows in (("df", samples.df), ("mc", samples.mc), ("mse", samples.mse)):
        if rows:
            write_samples_csv(out / f"samples_{kind}.csv", rows)
    print(f"cubic h={tuple(round(v, 4) for v in params.h)} r2={report.cubic.r_square:.4f}")
    for q in sorted(report.affine):
        print(f"bucket {q}: a={report.affine[q].a:.4f} b={report.affine[q].b:.4f} "
              f"(r2 {report.affine[q].r_square:.3f}) c={report.line[q].c:.4f}")
    return EXIT_OK


def _params_or_table3(cfg: RunConfig) -> ModelParams:
    if cfg.params:
        return ModelParams.load(cfg.params)
    if cfg.params_init == "table3":
        return ModelParams.table3()
    raise ValidationError("need --params or --params-init table3")


def cmd_table(cfg: RunConfig) -> int:
    params = _params_or_table3(cfg)
    n = cfg.n if cfg.n is not None else cfg.layout.N
    if n < 1:
        raise ValidationError("--n must be positive")
    table = build_mix_table(n, params)
    path = Path(cfg.out) / f"mix_table_N{n}.json"
    table.save(path)
    print(f"wrote {path} ({len(table.entries)} entries)")
    return EXIT_OK


def _frame_kinds(cfg: RunConfig, pocs) -> dict[int, tuple[bool, int]]:
    """(is_intra, qp) per POC, from a coded sequence when given, else from the GOP layout."""
    if cfg.sequence:
        seq = load_sequence(cfg.sequence)
        return {fr.poc: (fr.is_intra, fr.qp) for fr in seq.frames}
    if len(cfg.qp) != 1:
        raise ValidationError("plan needs a single base --qp (or --sequence)")
    info = cfg.gop_structure.frame_info(max(pocs) + 1)
    return {p: (info[p].is_intra, frame_qp(cfg.qp[0], info[p])) for p in pocs}


def _plan_all(sal: dict, kinds: dict, target: float, params: ModelParams,
              table: Optional[MixTable]) -> tuple[dict, list[dict]]:
    plans, diags, infeasible = {}, [], []
    for p in sorted(sal):
        intra, qp = kinds[p]
        bucket = qp_bucket(qp)
        t0 = time.perf_counter()
        try:
            plan = plan_frame(sal[p], target, bucket, params, table, intra=intra)
        except InfeasibleTargetError as exc:
            infeasible.append((p, exc.achievable))
            continue
        elapsed = time.perf_counter() - t0
        plans[p] = plan
        d = plan.diagnostics.to_dict() if plan.diagnostics is not None else {}
        diags.append({"frame": p, "type": "I" if intra else "B", "qp": qp, "bucket": int(bucket),
                      "branch": plan.branch, "predicted": plan.predicted_reduction,
                      "I": d.get("I"), "B": d.get("B"),
                      "intra_capped": d.get("intra_capped", False), "plan_seconds": elapsed})
    if infeasible:
        lines = "\n".join(f"  frame {p}: achievable maximum {m:.4f}" for p, m in infeasible)
        raise InfeasibleTargetError(f"target {target:.4f} infeasible on {len(infeasible)} frame(s):\n{lines}",
                                    min(m for _, m in infeasible))
    return plans, diags


def cmd_plan(cfg: RunConfig) -> int:
    if not cfg.saliency:
        raise ValidationError("plan needs --saliency")
    if not cfg.targets:
        raise ValidationError("plan needs --targets")
    params = _load_params(cfg)
    sal = read_saliency_file(cfg.saliency)
    ns = {m.N for m in sal.values()}
    if len(ns) != 1:
        raise ValidationError(f"saliency rows have differing CTU counts {sorted(ns)}")
    kinds = _frame_kinds(cfg, list(sal))
    missing = sorted(set(sal) - set(kinds))
    if missing:
        raise ValidationError(f"saliency frames {missing[:5]} not in the sequence")
    table = build_mix_table(ns.pop(), params) if any(t > 0 for t in cfg.targets) else None
    out = Path(cfg.out)
    for t in cfg.targets:
        plans, diags = _plan_all(sal, kinds, t, params, table)
        save_plans(out / f"plans_{_target_tag(t)}.json", plans)
        rows = [dict(d) for d in diags]
        for r in rows:
            ms = 1000.0 * r.pop("plan_seconds")
            if cfg.wallclock:
                r["plan_ms"] = ms
        atomic_write_text(out / f"plans_{_target_tag(t)}_diagnostics.csv", _csv_text(rows))
        print(f"target {t:.2f}: {len(plans)} frame plans -> {out}")
    return EXIT_OK


def _simulate_one(cfg: RunConfig, prep: PreparedClip, target: float, plans, plan_seconds,
                  profile: CostProfile) -> dict:
    res = run_planned(prep, plans, target, profile, with_propagation=cfg.propagation,
                      plan_seconds=plan_seconds)
    label, qp = prep.spec.name, prep.spec.qp
    stem = f"{label}_{qp}_{_target_tag(target)}"
    out = Path(cfg.out)
    atomic_write_text(out / f"{stem}.csv", _csv_text(res.frame_rows))
    summary = res.summary()
    summary.update(sequence=label, qp=qp, frames=len(prep.source))
    if target > 0:
        summary["control_error"] = control_error_report([target], [res.achieved]).to_dict()
    atomic_write_json(out / f"{stem}.json", summary)
    print(f"{label} QP {qp} target {target:.2f}: achieved {res.achieved:.4f} "
          f"dPSNR {res.delta_psnr:.3f} dB dEW-PSNR {res.delta_ew_psnr:.3f} dB")
    return summary


def _prepared(cfg: RunConfig):
    """Yield a PreparedClip per source and QP, reusing --sequence when given."""
    for label, frames, sal in _sources(cfg):
        for qp in cfg.qp:
            if cfg.sequence:
                seq = load_sequence(cfg.sequence)
                if (seq.layout.width, seq.layout.height) != frames[0].shape[::-1]:
                    raise ValidationError("--sequence dimensions do not match the source video")
                qp = min(seq.qps().values())
            else:
                seq = _encode(cfg, frames, qp)
            spec = ClipSpec(label, cfg.seed, cfg.width, cfg.height, len(frames), qp, cfg.ctu_size,
                            cfg.gop, cfg.intra_period, cfg.search_range)
            yield PreparedClip(spec, frames, sal, seq, decode_sequence(seq))
            if cfg.sequence:
                break


def cmd_simulate(cfg: RunConfig) -> int:
    profile = cfg.profile()
    summaries = []
    for prep in _prepared(cfg):
        if cfg.plans:
            for path in cfg.plans:
                plans = load_plans(path)
                target = max((pl.predicted_reduction for pl in plans.values()), default=0.0)
                stem = Path(path).stem
                if stem.startswith("plans_"):
                    try:
                        target = float(stem.split("_")[1])
                    except ValueError:
                        pass
                summaries.append(_simulate_one(cfg, prep, target, plans, None, profile))
            continue
        targets = cfg.targets or [0.0]
        params = None
        table = None
        if any(t > 0 for t in targets):
            params = _load_params(cfg)
            table = build_mix_table(prep.seq.layout.N, params)
        for t in targets:
            if t > 0:
                kinds = {fr.poc: (fr.is_intra, fr.qp) for fr in prep.seq.frames}
                plans, diags = _plan_all(prep.saliency, kinds, t, params, table)
                seconds = [d["plan_seconds"] for d in sorted(diags, key=lambda d: d["frame"])]
            else:
                plans, seconds = {}, [0.0] * len(prep.source)
            summaries.append(_simulate_one(cfg, prep, t, plans, seconds if cfg.wallclock else None,
                                           profile))
    return EXIT_OK


def _load_reports(cfg: RunConfig) -> list[dict]:
    if not cfg.reports:
        raise ValidationError("need --reports (summary JSON files written by simulate)")
    return [json.loads(Path(p).read_text()) for p in cfg.reports]


def cmd_evaluate(cfg: RunConfig) -> int:
    reports = [r for r in _load_reports(cfg) if r["target"] > 0]
    if not reports:
        raise ValidationError("no reports with a positive target")
    by_target: dict[float, list[dict]] = {}
    for r in reports:
        by_target.setdefault(r["target"], []).append(r)
    result = {"per_target": {}, "overall": None}
    for t in sorted(by_target):
        rs = sorted(by_target[t], key=lambda r: (r["sequence"], r["qp"]))
        rep = control_error_report([t] * len(rs), [r["achieved"] for r in rs])
        result["per_target"][_target_tag(t)] = {
            **rep.to_dict(), "sequences": [f"{r['sequence']}@{r['qp']}" for r in rs],
            "delta_psnr": [r["delta_psnr"] for r in rs],
            "delta_ew_psnr": [r["delta_ew_psnr"] for r in rs],
        }
        print(f"target {t:.2f}: MAE {rep.mae:.3f} pts, MRE {rep.mre:.2f}% over {len(rs)} runs")
    rs = sorted(reports, key=lambda r: (r["target"], r["sequence"], r["qp"]))
    result["overall"] = control_error_report([r["target"] for r in rs],
                                             [r["achieved"] for r in rs]).to_dict()
    atomic_write_json(Path(cfg.out) / "evaluation.json", result)
    return EXIT_OK


def cmd_curves(cfg: RunConfig) -> int:
    points = [CurvePoint(r["sequence"], int(r["qp"]), float(r["target"]), float(r["achieved"]),
                         float(r["delta_psnr"]), float(r["delta_ew_psnr"]))
              for r in _load_reports(cfg)]
    path = Path(cfg.out) / "curves.csv"
    atomic_write_text(path, emit_curves(points))
    print(f"wrote {path} ({len(points)} points)")
    return EXIT_OK


HANDLERS = {"gen": cmd_gen, "fit": cmd_fit, "table": cmd_table, "plan": cmd_plan,
            "simulate": cmd_simulate, "evaluate": cmd_evaluate, "curves": cmd_curves}


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cfg = resolve_config(argv)
        return HANDLERS[cfg.command](cfg)
    except InfeasibleTargetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DegenerateDataError as exc:
        print(f"error: degenerate training data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
