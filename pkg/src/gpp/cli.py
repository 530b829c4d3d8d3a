"""``gpp`` command line: measure, recover, train, psnr, sweep-calibration, check.

Every command that writes a file also writes ``<output>.manifest.json``
holding the resolved parameters, so a run can be repeated exactly.

Exit codes: 0 success, 2 usage, 3 I/O or malformed file, 4 model mismatch.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, bundled_prior_path
from .errors import FormatError, ModelMismatch
from .imagecore import psnr, psnr_sign_ambiguous
from .imageio import read_image, write_image
from .recovery import (SWEEP_POINTS, RecoveryConfig, format_schedule,
                       parse_schedule, recover, sweep_calibration, sweep_csv)
from .sensing import CalibrationParams, Model, measure_image, read_bundle, write_bundle
from .tensornet import load_weights, save_weights

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_MODEL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _write_text(path, text):
    # newline="" keeps LF on every platform
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(text)


def write_manifest(out_path, command, params, inputs, outputs):
    manifest = {
        "command": command,
        "parameters": params,
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "outputs": {k: str(v) for k, v in outputs.items() if v is not None},
        "tool_version": __version__,
    }
    _write_text(f"{out_path}.manifest.json",
                json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _schedule_arg(text):
    try:
        sched = parse_schedule(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return sched


def _points_arg(text):
    pts = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            a, b = part.split(":")
            pts.append((float(a), float(b)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad sweep point {part!r}, want a:b") from None
    return pts


def _fraction(text):
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _load_net(path):
    return load_weights(path if path else bundled_prior_path())


# --- commands ---------------------------------------------------------------


def cmd_measure(args):
    model = Model.parse(args.model)
    if model is Model.MASK:
        if args.keep_fraction is None:
            raise UsageError("--model mask needs --keep-fraction")
    elif (args.mr is None) == (args.m is None):
        raise UsageError("give exactly one of --mr and --m")
    img = read_image(args.image)
    cal = CalibrationParams(args.a, args.b) if model is Model.CALIBRATED else None
    bundle = measure_image(img, args.tau, model, rate=args.mr, m=args.m, seed=args.seed,
                           calibration=cal, keep_fraction=args.keep_fraction,
                           pad_mode=args.pad)
    write_bundle(args.out, bundle)
    params = {"tau": args.tau, "mr": args.mr, "m": bundle.m, "n": bundle.n,
              "seed": args.seed, "model": model.name.lower(), "pad": args.pad,
              "grid": [bundle.grid_rows, bundle.grid_cols],
              "image_size": [bundle.height, bundle.width]}
    if cal is not None:
        params.update(a=cal.a, b=cal.b)
    if model is Model.MASK:
        params["keep_fraction"] = args.keep_fraction
    write_manifest(args.out, "measure", params, {"image": args.image}, {"measurements": args.out})
    print(f"m={bundle.m} n={bundle.n} patches={bundle.num_patches}")


def cmd_recover(args):
    bundle = read_bundle(args.meas)
    net = _load_net(args.weights)
    if args.height or args.width:
        bundle.height = args.height or bundle.height
        bundle.width = args.width or bundle.width
    cfg = RecoveryConfig(mode=args.mode, iters=args.iters, lr_schedule=args.lr_schedule,
                         seed=args.seed, restarts=args.restarts, trace_every=args.trace_every)
    result = recover(bundle, net, cfg)
    write_image(args.out, result.image)
    trace = args.trace or f"{args.out}.trace.csv"
    _write_text(trace, result.trace_csv())
    params = {"mode": cfg.mode, "iters": cfg.iters, "lr_schedule": format_schedule(cfg.lr_schedule),
              "seed": cfg.seed, "restarts": cfg.restarts, "trace_every": cfg.trace_every,
              "image_size": [bundle.height, bundle.width],
              "final_loss": result.final_loss,
              "a_hat": result.calibration.a, "b_hat": result.calibration.b}
    write_manifest(args.out, "recover", params,
                   {"measurements": args.meas, "weights": args.weights or "<bundled prior>"},
                   {"image": args.out, "trace": trace})
    print(f"final_loss={result.final_loss:.10g} a={result.calibration.a:.10g} "
          f"b={result.calibration.b:.10g}")


def cmd_train(args):
    from .trainer import fit_autoencoder, fit_gan, load_directory, synthetic_dataset
    if (args.patches_dir is None) == (args.synthetic is None):
        raise UsageError("give exactly one of --patches-dir and --synthetic")
    if args.patches_dir is not None:
        ds = load_directory(args.patches_dir, args.tau, args.max_patches, args.seed)
    else:
        ds = synthetic_dataset(args.synthetic, args.tau, args.seed)
    params = {"mode": args.mode, "tau": args.tau, "latent_dim": args.latent_dim,
              "seed": args.seed, "patches": len(ds), "max_patches": args.max_patches}
    if args.mode == "decoder":
        lr = 5e-3 if args.lr is None else args.lr
        fit = fit_autoencoder(ds, args.latent_dim, args.epochs, lr, args.seed)
        net = fit.decoder
        final = float(np.mean(fit.reconstruction_mse(ds.patches)))
        params.update(epochs=args.epochs, lr=lr, final_mse=final)
        summary = f"final_mse={final:.6g}"
    else:
        lr = 2e-4 if args.lr is None else args.lr
        lr_d = lr if args.lr_d is None else args.lr_d
        fit = fit_gan(ds, args.latent_dim, args.iterations, lr, lr_d, args.seed)
        net = fit.generator
        params.update(iterations=args.iterations, lr_g=lr, lr_d=lr_d)
        if fit.g_losses:
            params.update(final_d_loss=fit.d_losses[-1], final_g_loss=fit.g_losses[-1])
        summary = f"iterations={args.iterations}"
    save_weights(args.out, net)
    write_manifest(args.out, "train", params,
                   {"patches_dir": args.patches_dir, "synthetic": args.synthetic},
                   {"weights": args.out})
    print(summary)


def cmd_psnr(args):
    a, b = read_image(args.image), read_image(args.reference)
    fn = psnr_sign_ambiguous if args.sign_ambiguous else psnr
    value = fn(a, b, args.peak)
    print("inf" if value == np.inf else f"{value:.6f}")


def cmd_sweep_calibration(args):
    from .verify import planted_generator, planted_image
    net = load_weights(args.weights) if args.weights else planted_generator()
    if args.image:
        image = read_image(args.image)
        source = {"image": args.image}
    else:
        image, _ = planted_image(net, args.plant_rows, args.plant_cols, args.plant_seed)
        source = {"image": f"planted {args.plant_rows}x{args.plant_cols} seed {args.plant_seed}"}
    # both engines run the schedule gpp-sc resolves to, so only the objective differs
    common = dict(iters=args.iters, seed=args.rec_seed, restarts=args.restarts,
                  trace_every=10 ** 9)
    cfg_sc = RecoveryConfig("gpp-sc", lr_schedule=args.lr_schedule, **common)
    cfg_gpp = RecoveryConfig("gpp", lr_schedule=cfg_sc.lr_schedule, **common)
    rows = sweep_calibration(image, net, args.points, tau=args.tau, rate=args.mr,
                             seed=args.seed, cfg_gpp=cfg_gpp, cfg_sc=cfg_sc)
    text = sweep_csv(rows)
    if args.out:
        _write_text(args.out, text)
        params = {"points": [list(p) for p in args.points], "mr": args.mr, "seed": args.seed,
                  "tau": args.tau or net.tau_out, "rec_seed": args.rec_seed,
                  "restarts": args.restarts,
                  "lr_schedule_gpp": format_schedule(cfg_gpp.lr_schedule),
                  "lr_schedule_gpp_sc": format_schedule(cfg_sc.lr_schedule),
                  "plant": None if args.image else [args.plant_rows, args.plant_cols,
                                                     args.plant_seed]}
        source["weights"] = args.weights or "<planted generator>"
        write_manifest(args.out, "sweep-calibration", params, source, {"csv": args.out})
    else:
        sys.stdout.write(text)


def cmd_check(args):
    from .verify import check_suite
    results = check_suite(quick=not args.full)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else 1


# --- parser -----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="gpp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("measure", help="simulate per-patch measurements of an image")
    s.add_argument("--image", required=True)
    s.add_argument("--tau", type=_positive, default=32)
    s.add_argument("--mr", type=_fraction)
    s.add_argument("--m", type=_positive)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--model", choices=[m.name.lower() for m in Model], default="linear")
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--b", type=float, default=0.0)
    s.add_argument("--keep-fraction", type=_fraction)
    s.add_argument("--pad", choices=["none", "replicate"], default="replicate")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("recover", help="reconstruct an image from a GPPM file")
    s.add_argument("--meas", required=True)
    s.add_argument("--weights", help="GPPW file (default: bundled 16x16 prior)")
    s.add_argument("--mode", choices=["gpp", "gpp-sc", "phase", "mask"], default="gpp")
    s.add_argument("--iters", type=int)
    s.add_argument("--lr-schedule", type=_schedule_arg)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=_positive, default=1)
    s.add_argument("--trace-every", type=_positive, default=10)
    s.add_argument("--height", type=int, default=0, help="crop output to this height")
    s.add_argument("--width", type=int, default=0, help="crop output to this width")
    s.add_argument("--out", required=True)
    s.add_argument("--trace")
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("train", help="train a patch generator")
    s.add_argument("--patches-dir")
    s.add_argument("--synthetic", type=_positive, help="use N synthetic patches instead")
    s.add_argument("--max-patches", type=_positive)
    s.add_argument("--tau", type=int, choices=[16, 32], default=16)
    s.add_argument("--mode", choices=["decoder", "gan"], default="decoder")
    s.add_argument("--latent-dim", type=_positive, default=64)
    s.add_argument("--epochs", type=int, default=2000)
    s.add_argument("--iterations", type=int, default=1000)
    s.add_argument("--lr", type=float)
    s.add_argument("--lr-d", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("psnr", help="PSNR of an image against a reference")
    s.add_argument("image")
    s.add_argument("reference")
    s.add_argument("--peak", type=float, default=1.0)
    s.add_argument("--sign-ambiguous", action="store_true")
    s.set_defaults(func=cmd_psnr)

    s = sub.add_parser("sweep-calibration", help="gpp vs gpp-sc under gain/shift errors")
    s.add_argument("--weights", help="GPPW file (default: planted test generator)")
    s.add_argument("--image", help="test image (default: planted image from the generator)")
    s.add_argument("--plant-rows", type=_positive, default=2)
    s.add_argument("--plant-cols", type=_positive, default=2)
    s.add_argument("--plant-seed", type=int, default=1000)
    s.add_argument("--points", type=_points_arg, default=SWEEP_POINTS,
                   help="comma-separated a:b pairs")
    s.add_argument("--tau", type=_positive)
    s.add_argument("--mr", type=_fraction, default=0.5)
    s.add_argument("--seed", type=int, default=3, help="operator seed")
    s.add_argument("--rec-seed", type=int, default=1, help="latent initialisation seed")
    s.add_argument("--restarts", type=_positive, default=3)
    s.add_argument("--iters", type=int)
    s.add_argument("--lr-schedule", type=_schedule_arg)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep_calibration)

    s = sub.add_parser("check", help="run the oracle self-check suite")
    s.add_argument("--full", action="store_true", help="use the larger instance counts")
    s.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        status = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except ModelMismatch as exc:
        print(f"gpp: model mismatch: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (OSError, FormatError) as exc:
        print(f"gpp: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"gpp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if status is None else status


if __name__ == "__main__":
    sys.exit(main())
