"""Command-line front end: degrade, restore, evaluate, verify, slice.

Every command is driven by the flat key-value config (``--config``); restore
and evaluate write a delimited record plus a rendered PNG figure next to it.
Exit codes: 0 success, 1 validation error, 2 runtime error, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import diagnostics, report as report_mod
from .config import ConfigError, load_config_file, read_kv, write_kv
from .metrics import evaluate as evaluate_metrics
from .operators import BoundOp, NoiseSpec, degrade, op_from_spec
from .priors import AlphaSchedule, external_prior_connect, gaussian_prior, \
    identity_prior, smoothing_prior, GaussianPriorSpec
from .samplers import admm_tv_restore, latino_image_restore, latino_restore, \
    latino_v_restore, vision_xl_restore, VisionXLConfig
from .video import load_video, save_video, slice_extract, save_slice_image, VideoTensor

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3


def _build_prior(binding: str, schedule: AlphaSchedule):
    if binding == "builtin:gaussian":
        return gaussian_prior(GaussianPriorSpec(), schedule)
    if binding == "builtin:smoothing":
        return smoothing_prior(schedule)
    if binding == "builtin:identity":
        return identity_prior(schedule)
    if binding.startswith("external:"):
        command = binding.partition(":")[2]
        model_id = "default"
        if "@" in command:
            command, _, model_id = command.rpartition("@")
        return external_prior_connect(command, model_id, schedule)
    raise ConfigError(f"unknown prior binding {binding!r}")


def cmd_degrade(args) -> int:
    cfg = load_config_file(args.config)
    outdir = Path(args.output or cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    x = load_video(cfg.input_path)
    op = op_from_spec(cfg.operator_spec, x.shape)
    seed = args.seed if args.seed is not None else cfg.noise_seed
    y = degrade(op, x, NoiseSpec(cfg.sigma_n, seed))
    save_video(y, outdir / "y.vten", format="raw")
    write_kv({
        "operator.stages": cfg.operator_spec,
        "noise.sigma_n": repr(cfg.sigma_n),
        "noise.seed": str(seed),
        "input.shape": ",".join(map(str, x.shape)),
        "output.shape": ",".join(map(str, y.shape)),
    }, outdir / "y.meta", header="measurement metadata: reconstructs the operator exactly")
    print(f"wrote {outdir / 'y.vten'} shape={y.shape} sigma_n={cfg.sigma_n:g} seed={seed}")
    return EXIT_OK


def _reconstruct_operator(meta: dict) -> tuple[BoundOp, float]:
    in_shape = tuple(int(v) for v in meta["input.shape"].split(","))
    op = op_from_spec(meta["operator.stages"], in_shape)
    sigma_n = float(meta["noise.sigma_n"])
    return op, sigma_n


def cmd_restore(args) -> int:
    cfg = load_config_file(args.config)
    outdir = Path(args.output or cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    measurement_dir = Path(cfg.input_path)
    y_path = measurement_dir / "y.vten" if measurement_dir.is_dir() else measurement_dir
    meta_path = y_path.with_suffix(".meta")
    if not meta_path.exists():
        raise ConfigError(f"paths.input: metadata sidecar missing: {meta_path}")
    y = load_video(y_path, format="raw")
    meta = read_kv(meta_path)
    op, sigma_n = _reconstruct_operator(meta)
    if tuple(int(v) for v in meta["output.shape"].split(",")) != y.shape:
        raise ConfigError(f"metadata output.shape disagrees with measurement {y.shape}")

    scfg = cfg.sampler_cfg
    overrides = {"sigma_n": max(sigma_n, 1e-12)}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if cfg.init_file:
        overrides["init"] = "file"
        overrides["init_tensor"] = load_video(cfg.init_file).data
    scfg = replace(scfg, **overrides)

    schedule = AlphaSchedule()
    priors = []
    try:
        if cfg.sampler == "latino":
            vcm = _build_prior(cfg.prior_vcm, schedule)
            icm = _build_prior(cfg.prior_icm, schedule)
            priors += [vcm, icm]
            x, rep = latino_restore(y, op, vcm, icm, scfg)
        elif cfg.sampler == "latino-v":
            vcm = _build_prior(cfg.prior_vcm, schedule)
            priors.append(vcm)
            x, rep = latino_v_restore(y, op, vcm, scfg)
        elif cfg.sampler == "latino-image":
            icm = _build_prior(cfg.prior_icm, schedule)
            priors.append(icm)
            x, rep = latino_image_restore(y, op, icm, scfg)
        elif cfg.sampler == "vision-xl":
            prior = _build_prior(cfg.prior_vcm, schedule)
            priors.append(prior)
            vxl = VisionXLConfig(rho_fraction=cfg.vxl.rho_fraction, cg_iters=cfg.vxl.cg_iters,
                                 sigma_max=cfg.vxl.sigma_max, sigma_n=sigma_n, seed=scfg.seed)
            x, rep = vision_xl_restore(y, op, prior, vxl)
        elif cfg.sampler == "admm-tv":
            x, rep = admm_tv_restore(y, op, scfg.tv_weights, cfg.admm_rho,
                                     cfg.admm_iters, sigma_n=max(sigma_n, 1e-12), cg=scfg.cg)
        else:
            raise ConfigError(f"sampler.kind: unknown sampler {cfg.sampler!r}")
    finally:
        for p in priors:
            close = getattr(p, "close", None)
            if close:
                close()

    save_video(x, outdir / "x_hat.vten", format="raw")
    save_video(np.clip(x, 0.0, 1.0), outdir / "frames", format="frame-dir")
    report_mod.write_run_report(rep, outdir / "report.tsv")
    report_mod.render_run_figure(rep, outdir / "report.png")
    print(f"restored {y.shape} -> {x.shape} with {cfg.sampler}"
          f"{' (' + rep.notes + ')' if rep.notes else ''}: "
          f"NFE={rep.nfe} residual {rep.init_residual:.4e} -> {rep.final_residual:.4e}")

    if cfg.metrics_enabled and cfg.reference_path:
        ref = load_video(cfg.reference_path)
        m = evaluate_metrics(x, ref)
        report_mod.write_metric_report(m, outdir / "metrics.tsv")
        report_mod.render_metric_figure(m, outdir / "metrics.png")
        print(f"PSNR {m.psnr:.3f} dB  SSIM {m.ssim:.5f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    x = load_video(args.restored)
    ref = load_video(args.reference)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: restored {x.shape} vs reference {ref.shape}")
    m = evaluate_metrics(x, ref)
    print("frame\tpsnr_db\tssim")
    for t, (p, s) in enumerate(zip(m.psnr_per_frame, m.ssim_per_frame)):
        print(f"{t}\t{p:.6f}\t{s:.8f}")
    print(f"mean\t{m.psnr:.6f}\t{m.ssim:.8f}")
    if args.output:
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        report_mod.write_metric_report(m, outdir / "metrics.tsv")
        report_mod.render_metric_figure(m, outdir / "metrics.png")
    return EXIT_OK


def cmd_verify(args) -> int:
    rows = diagnostics.run_all(break_adjoint=args.break_adjoint)
    width = max(len(r[0]) for r in rows)
    failed = 0
    for name, ok, measured, threshold in rows:
        status = "PASS" if ok else "FAIL"
        print(f"{status}  {name:<{width}}  measured={measured:.3e}  threshold={threshold:.0e}")
        failed += 0 if ok else 1
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def cmd_slice(args) -> int:
    x = load_video(args.video)
    s = slice_extract(x, args.column)
    out = Path(args.output or f"slice_{args.column:05d}.png")
    if out.is_dir():
        out = out / f"slice_{args.column:05d}.png"
    save_slice_image(s, out)
    print(f"wrote {out} ({s.rows}x{s.cols})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lavino",
        description="zero-shot video restoration: degradation synthesis, "
                    "split-Langevin samplers, metrics, diagnostics")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="synthesize a measurement y = Ax + noise")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None, help="output directory")
    p.set_defaults(fn=cmd_degrade)

    p = sub.add_parser("restore", help="run a sampler on a measurement")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None, help="output directory")
    p.set_defaults(fn=cmd_restore)

    p = sub.add_parser("evaluate", help="PSNR/SSIM of a restoration against a reference")
    p.add_argument("restored")
    p.add_argument("reference")
    p.add_argument("--output", default=None, help="optional output directory")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("verify", help="run the built-in numerical self-checks")
    p.add_argument("--break-adjoint", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("slice", help="extract a fixed-column (row, frame) slice image")
    p.add_argument("video")
    p.add_argument("column", type=int)
    p.add_argument("--output", default=None)
    p.set_defaults(fn=cmd_slice)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FileNotFoundError, IndexError, ValueError) as e:
        # bad inputs, shapes, or arguments are validation failures
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
