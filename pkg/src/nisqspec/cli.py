"""Command-line front end.

Usage errors exit with status 2 (argparse); data errors exit with status 1 and
a JSON object ``{"error": ..., "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import SCHEMA_VERSION, __version__
from . import channels as ch
from . import circuits, ensembles, io, pipeline, retrieval, spam, spectral, tomography
from . import numerics as nx
from ._accel import backend
from .errors import BadDataset, NisqSpecError


def _write_text(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _write_json(obj, out) -> None:
    _write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", out)


def _fit_config(args) -> retrieval.FitConfig:
    return retrieval.FitConfig(lr=args.lr, max_iters=args.max_iters, seed=args.seed,
                               init_scale=args.init_scale, batch=args.batch)


# -- subcommands ---------------------------------------------------------------------


def cmd_gen_truth(args):
    d = 2 ** args.n
    if args.kind == "spam":
        io.save_spam(spam.synthetic_spam(d, args.c1, args.c2, args.seed), args.out)
        return
    if args.kind == "identity":
        io.save_map(ch.identity_map(d), args.out)
        return
    truth = {"kind": args.kind, "n": args.n, "alpha": args.alpha, "beta": args.beta,
             "rank": args.rank, "p": args.p, "depth": args.depth}
    io.save_map(pipeline.make_truth(truth, args.seed), args.out)


def cmd_gen_data(args):
    truth = io.load_map(args.map) if args.map else None
    spam_truth = io.load_spam(args.spam)
    n = tomography.n_qubits(spam_truth.d)
    if args.spam_only:
        modes = tomography.spam_modes(n)
        truth = ch.identity_map(spam_truth.d)
    elif truth is None:
        raise BadDataset("--map is required unless --spam-only is given")
    elif args.modes is None:
        modes = tomography.all_modes(n)
    else:
        modes = tomography.sample_modes(n, args.modes, args.seed)
    ds = tomography.simulate_frequencies(truth, spam_truth, modes, args.shots, args.seed + 1)
    if args.train_fraction is None:
        io.save_dataset(ds, args.out)
        return
    if not args.test_out:
        raise BadDataset("--test-out is required with --train-fraction")
    train, test = tomography.split(ds, args.train_fraction, args.seed + 2)
    io.save_dataset(train, args.out)
    io.save_dataset(test, args.test_out)


def cmd_fit_spam(args):
    ds = io.load_dataset(args.data)
    fitted, report = retrieval.fit_spam(ds, _fit_config(args), args.model, return_report=True)
    io.save_spam(fitted, args.out)
    if args.report:
        _write_json(report.to_dict(), args.report)


def cmd_fit_map(args):
    ds = io.load_dataset(args.data)
    model = io.load_spam(args.spam)
    cfg = _fit_config(args)
    cfg.refine_spam = args.refine_spam
    result = retrieval.fit_map(ds, model, args.rank, cfg)
    io.save_map(result[0], args.out)
    if args.refine_spam and args.spam_out:
        io.save_spam(result[2], args.spam_out)
    if args.report:
        _write_json(result[1].to_dict(), args.report)


def cmd_kl_eval(args):
    kl = retrieval.kl_eval(io.load_map(args.map), io.load_spam(args.spam), io.load_dataset(args.data))
    _write_json({"kl": kl, "inverse_kl": 1.0 / kl if kl > 0 else None}, args.out)


def cmd_spectrum(args):
    spec = ch.spectrum(io.load_map(args.map))
    if args.out in (None, "-"):
        sys.stdout.write("re,im\n" + "".join(f"{z.real!r},{z.imag!r}\n" for z in spec.values.tolist()))
    else:
        io.save_spectrum(spec, args.out)


def cmd_fit_du(args):
    spec = io.load_spectrum(args.spectrum)
    grid_p = np.round(np.arange(args.p_step, 1.0 - 1e-9, args.p_step), 10)
    fit = spectral.fit_du(spec, args.d, grid_p=grid_p, m_samples=args.m_samples, seed=args.seed,
                          sigma=args.sigma, metric=args.metric, search=args.search)
    _write_json(fit.to_dict(), args.out)


def cmd_expressibility(args):
    lines = ["depth,n_samples,value"]
    for depth in args.depth:
        vals = [circuits.expressibility(args.n, depth, args.samples, args.bins,
                                        seed=nx.derive_rng(args.seed, depth, k),
                                        baseline=args.baseline)
                for k in range(args.repeats)]
        lines.append(f"{depth},{args.samples},{float(np.mean(vals))!r}")
    _write_text("\n".join(lines) + "\n", args.out)


def cmd_plot_data(args):
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    rows = ["source,re,im"]
    for path, label in ((args.spectrum, "map"), (args.reference, "reference")):
        if path:
            for z in io.load_spectrum(path).bulk.tolist():
                rows.append(f"{label},{z.real!r},{z.imag!r}")
    Path(f"{prefix}_scatter.csv").write_text("\n".join(rows) + "\n")
    if args.fit:
        fit = json.loads(Path(args.fit).read_text())
        fit = fit.get("retrieved", fit)
        r_minus, r_plus = ensembles.du_radii(fit["p_star"], fit["r_star"])
        angles = np.linspace(0.0, 2 * np.pi, args.points)
        rows = ["circle,radius,theta,re,im"]
        for name, rad in (("R_minus", r_minus), ("R_plus", r_plus)):
            if rad is None:
                continue
            for t in angles:
                rows.append(f"{name},{rad!r},{t!r},{rad * np.cos(t)!r},{rad * np.sin(t)!r}")
        Path(f"{prefix}_circles.csv").write_text("\n".join(rows) + "\n")
    if args.radii_rank:
        rows = ["p,r,R_minus,R_plus"]
        for p in np.linspace(0.0, 1.0, args.points):
            for r in args.radii_rank:
                r_minus, r_plus = ensembles.du_radii(float(p), r)
                rows.append(f"{p!r},{r},{'' if r_minus is None else repr(r_minus)},{r_plus!r}")
        Path(f"{prefix}_radii.csv").write_text("\n".join(rows) + "\n")


def cmd_run(args):
    path = pipeline.bundled_config(args.bundled) if args.bundled else args.config
    if path is None:
        raise BadDataset("give --config or --bundled")
    cfg = pipeline.PipelineConfig.load(path)
    out = args.out or cfg.raw["output_dir"] or cfg.name
    status, manifest = pipeline.run_pipeline(cfg, out)
    summary = {"status": manifest["status"], "manifest": str(Path(out) / "manifest.json")}
    if status:
        summary.update(failed_stage=manifest.get("failed_stage"), error=manifest.get("error"))
        print(json.dumps(summary), file=sys.stderr)
    else:
        print(json.dumps(summary))
    return status


# -- parser --------------------------------------------------------------------------


def _common(p, out_required=False):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=out_required, default=None)


def _fit_options(p):
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--report", default=None)


def build_parser() -> argparse.ArgumentParser:
    version = (f"nisqspec {__version__} (schema {SCHEMA_VERSION}, "
               f"gate convention {tomography.GATE_CONVENTION}, qubit order {tomography.QUBIT_ORDER})")
    parser = argparse.ArgumentParser(prog="nisqspec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=version)
    parser.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-truth", help="write a ground-truth map or SPAM model")
    _common(p, out_required=True)
    p.add_argument("--kind", choices=["lindblad", "du", "circuit", "spam", "identity"], required=True)
    p.add_argument("--n", type=int, default=1, help="number of qubits")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--c1", type=float, default=0.9)
    p.add_argument("--c2", type=float, default=0.8)
    p.set_defaults(func=cmd_gen_truth)

    p = sub.add_parser("gen-data", help="simulate shot frequencies for Pauli modes")
    _common(p, out_required=True)
    p.add_argument("--map", default=None)
    p.add_argument("--spam", required=True)
    p.add_argument("--shots", type=int, default=1024)
    p.add_argument("--modes", type=int, default=None, help="random modes (default: all 18^n)")
    p.add_argument("--spam-only", action="store_true", help="identity map, all-z measurements")
    p.add_argument("--train-fraction", type=float, default=None)
    p.add_argument("--test-out", default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("fit-spam", help="fit rho0 and the readout model")
    _common(p, out_required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=["corruption", "povm"], default="corruption")
    _fit_options(p)
    p.set_defaults(func=cmd_fit_spam)

    p = sub.add_parser("fit-map", help="fit a rank-r CPTP map")
    _common(p, out_required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--spam", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--refine-spam", action="store_true")
    p.add_argument("--spam-out", default=None)
    _fit_options(p)
    p.set_defaults(func=cmd_fit_map)

    p = sub.add_parser("kl-eval", help="mean KL divergence on held-out modes")
    _common(p)
    p.add_argument("--map", required=True)
    p.add_argument("--spam", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_kl_eval)

    p = sub.add_parser("spectrum", help="superoperator eigenvalues as CSV")
    _common(p)
    p.add_argument("--map", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("fit-du", help="fit a diluted-unitary ensemble to a spectrum")
    _common(p)
    p.add_argument("--spectrum", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m-samples", type=int, default=5)
    p.add_argument("--p-step", type=float, default=0.02)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--metric", choices=["sd", "w2"], default="sd")
    p.add_argument("--search", choices=["grid", "refine"], default="grid")
    p.set_defaults(func=cmd_fit_du)

    p = sub.add_parser("expressibility", help="KL expressibility of the layered circuit")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--depth", type=int, nargs="+", required=True)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--bins", type=int, default=circuits.N_BINS)
    p.add_argument("--repeats", type=int, default=1, help="average over this many seeds")
    p.add_argument("--baseline", choices=["sampled", "analytic"], default="sampled")
    p.set_defaults(func=cmd_expressibility)

    p = sub.add_parser("plot-data", help="CSV tables for eigenvalue scatter and radii plots")
    _common(p, out_required=True)
    p.add_argument("--spectrum", default=None)
    p.add_argument("--reference", default=None, help="second spectrum, e.g. a DU sample")
    p.add_argument("--fit", default=None, help="fit-du output for circle overlays")
    p.add_argument("--radii-rank", type=int, nargs="*", default=None)
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("run", help="run a full pipeline from a YAML config")
    _common(p)
    p.add_argument("--config", default=None)
    p.add_argument("--bundled", default=None, help="name of a bundled config")
    p.set_defaults(func=cmd_run)
    return parser


def _limit_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)
    if backend() == "numba":
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            build_parser().error("--threads must be positive")
        _limit_threads(args.threads)
    try:
        status = args.func(args)
    except (NisqSpecError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return int(status or 0)


if __name__ == "__main__":
    sys.exit(main())
