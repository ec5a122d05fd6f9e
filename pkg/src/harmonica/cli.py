"""Command-line surface.

Subcommands: point, region, field, sweep, adv-search, adv-batch, map,
bench-coverage, simplex.  Exit codes: 0 ok, 2 usage or config problem,
3 model backend failure, 4 non-finite model output.  All outputs are
byte-reproducible for fixed seeds at any --jobs value.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import adversarial as adv
from . import analysis, gamma, geometry, images
from .errors import (BackendError, ConfigError, EmptyBallError,
                     EvaluationError, HarmonicaError, ModelOutputError)
from .geometry import BallSpec, ball_points, coverage_metrics, simplex_vertices
from .models import OutputProjection, builtin, load_mlp, pixel_domain
from .protocol import connect_external

PROG = "gamma"


def parse_vector(text):
    parts = text.split(",")
    values = []
    for i, tok in enumerate(parts):
        tok = tok.strip()
        try:
            values.append(float(tok))
        except ValueError:
            raise ConfigError(f"malformed vector: component {i} ({tok!r}) "
                              f"is not a number") from None
    if not values:
        raise ConfigError("empty vector")
    return np.array(values)


def parse_region(text):
    bounds = []
    for i, part in enumerate(text.split(",")):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ConfigError(f"region bound {i} ({part!r}) must look like lo:hi")
        try:
            bounds.append((float(lo), float(hi)))
        except ValueError:
            raise ConfigError(f"region bound {i} ({part!r}) is not numeric") from None
    return tuple(bounds)


def parse_int_list(text):
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def parse_float_list(text):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_param(kv):
    key, sep, val = kv.partition("=")
    if not sep:
        raise ConfigError(f"--param needs key=value, got {kv!r}")
    vals = val.split(",")
    try:
        parsed = [float(v) for v in vals]
    except ValueError:
        raise ConfigError(f"--param {key}: value {val!r} is not numeric") from None
    return key, parsed[0] if len(parsed) == 1 else parsed


# config-file key -> (argparse dest, converter)
_CONFIG_KEYS = {
    "model.builtin": ("builtin", str),
    "model.dim": ("dim", int),
    "model.mlp": ("mlp", str),
    "model.subprocess": ("subprocess_cmd", str),
    "model.http": ("http", str),
    "model.timeout": ("timeout", float),
    "ball.scheme": ("scheme", str),
    "ball.radius": ("r", float),
    "ball.fraction": ("fraction", float),
    "ball.seed": ("seed", int),
    "ball.circle_points": ("circle_points", int),
    "run.jobs": ("jobs", int),
    "run.out": ("out", str),
    "run.steps": ("steps", int),
    "run.lenient": ("lenient", lambda s: s.lower() in ("1", "true", "yes")),
    "run.projection": ("projection", str),
    "run.component": ("component", int),
}


def load_config(path):
    """Flat key=value file with model./ball./run. prefixed keys."""
    overrides = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        dest, conv = _CONFIG_KEYS[key]
        try:
            overrides[dest] = conv(val)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {val!r}") from None
    return overrides


def _add_model_args(p):
    g = p.add_argument_group("model source (exactly one)")
    g.add_argument("--builtin", choices=("f1", "f2", "f3", "f4", "linear",
                                         "constant", "step2d", "curve2d"),
                   help="built-in analytic model")
    g.add_argument("--mlp", help="JSON weights file for the feedforward evaluator")
    g.add_argument("--subprocess", dest="subprocess_cmd",
                   help="command line of a model speaking the stdio protocol")
    g.add_argument("--http", help="base URL of a model speaking the HTTP protocol")
    g.add_argument("--dim", type=int, help="input dimension (builtin models; "
                   "validated against external handshakes)")
    g.add_argument("--param", action="append", default=[], metavar="KEY=VAL",
                   help="builtin model parameter, repeatable "
                        "(e.g. boundary_level=1.5, a=1,2,3)")
    g.add_argument("--timeout", type=float, default=30.0,
                   help="per-batch timeout for external models (seconds)")
    g.add_argument("--quantize-pixels", action="store_true",
                   help="treat inputs as pixels: integers clamped to 0..255")


def _add_ball_args(p):
    g = p.add_argument_group("ball approximation")
    g.add_argument("--scheme", choices=geometry.SCHEMES, default="simplex")
    g.add_argument("--r", type=float, default=0.1, help="ball radius")
    g.add_argument("--fraction", type=float, default=1.0,
                   help="sample fraction for hypercube-sampled")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--circle-points", dest="circle_points", type=int, default=64)


def _add_projection_args(p):
    g = p.add_argument_group("output projection")
    g.add_argument("--projection", choices=("scalar", "component",
                                            "class-logit", "norm"),
                   help="default: scalar for 1-D outputs, class-logit otherwise")
    g.add_argument("--component", type=int, default=0)


def _add_run_args(p, with_out=True):
    g = p.add_argument_group("run control")
    g.add_argument("--jobs", type=int, help="worker threads "
                   "(default: HARMONICA_JOBS or the CPU count)")
    g.add_argument("--lenient", action="store_true",
                   help="skip failing points instead of aborting")
    g.add_argument("--config", help="key=value config file; flags win over it")
    if with_out:
        g.add_argument("--out", help="output directory for CSV/JSONL files")


def _add_region_args(p):
    g = p.add_argument_group("region")
    g.add_argument("--region", help="box bounds, e.g. 0:5,0:3")
    g.add_argument("--grid", help="grid points per dimension, e.g. 200,120")
    g.add_argument("--mc", type=int, help="Monte Carlo sample count")
    g.add_argument("--region-seed", dest="region_seed", type=int, default=0)
    g.add_argument("--per-point", dest="per_point", action="store_true",
                   help="also dump per-point gamma values")


def build_parser():
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Quantify how far a black-box model deviates from the "
                    "harmonic mean-value property, and probe prediction "
                    "stability with that signal.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("point", help="gamma at a single point")
    _add_model_args(p); _add_ball_args(p); _add_projection_args(p)
    _add_run_args(p, with_out=False)
    p.add_argument("--x", help="input vector, comma separated")
    p.add_argument("--stdin", action="store_true",
                   help="read the vector from standard input")

    p = sub.add_parser("region", help="mean gamma over a boxed region")
    _add_model_args(p); _add_ball_args(p); _add_projection_args(p)
    _add_region_args(p); _add_run_args(p)

    p = sub.add_parser("field", help="gamma at every grid node, CSV for contours")
    _add_model_args(p); _add_ball_args(p); _add_projection_args(p)
    _add_region_args(p); _add_run_args(p)

    p = sub.add_parser("sweep", help="mean gamma at several radii")
    _add_model_args(p); _add_ball_args(p); _add_projection_args(p)
    _add_region_args(p); _add_run_args(p)
    p.add_argument("--radii", required=True, help="comma separated radii")

    p = sub.add_parser("adv-search", help="gamma-ascent adversarial walk from one point")
    _add_model_args(p); _add_ball_args(p); _add_projection_args(p)
    _add_run_args(p)
    p.add_argument("--x", help="start vector, comma separated")
    p.add_argument("--pgm", help="start from a PGM image instead of --x")
    p.add_argument("--image-size", dest="image_size",
                   help="target W,H when reading images")
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--early-exit", dest="early_exit", action="store_true",
                   help="stop at the first label flip")
    p.add_argument("--dump-final-pgm", dest="dump_final",
                   help="write the final point as a PGM with this filename")

    p = sub.add_parser("adv-batch", help="stability statistics over a dataset")
    _add_model_args(p); _add_ball_args(p); _add_projection_args(p)
    _add_run_args(p)
    p.add_argument("--dataset", help="CSV with one vector per row")
    p.add_argument("--label-col", dest="label_col", type=int,
                   help="column index holding ground-truth labels")
    p.add_argument("--pgm-dir", dest="pgm_dir",
                   help="directory of PGM images instead of --dataset")
    p.add_argument("--image-size", dest="image_size")
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--early-exit", dest="early_exit", action="store_true")
    p.add_argument("--traces", action="store_true",
                   help="also write one trace JSONL per sample")

    p = sub.add_parser("map", help="bin batch records into a stability map")
    _add_run_args(p)
    p.add_argument("--records", required=True,
                   help="records CSV produced by adv-batch")
    p.add_argument("--prob-bins", dest="prob_bins", type=int, default=10)
    p.add_argument("--gamma-bins", dest="gamma_bins", type=int, default=10)
    p.add_argument("--lookup", help="print the stability estimate for 'prob,gamma'")
    p.add_argument("--nearest", action="store_true",
                   help="fall back to the nearest populated cell on lookup")

    p = sub.add_parser("bench-coverage",
                       help="centrality/isotropy of random vs simplex balls")
    _add_run_args(p)
    p.add_argument("--dims", required=True, help="comma separated dimensions")
    p.add_argument("--coverage-seeds", dest="coverage_seeds", type=int, default=50)

    p = sub.add_parser("simplex", help="export simplex vertices to CSV")
    _add_run_args(p)
    p.add_argument("--n", type=int, required=True)

    return parser


def resolve_jobs(args):
    if getattr(args, "jobs", None):
        return max(1, args.jobs)
    env = os.environ.get("HARMONICA_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HARMONICA_JOBS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def build_model(args):
    sources = [("builtin", args.builtin), ("mlp", args.mlp),
               ("subprocess", args.subprocess_cmd), ("http", args.http)]
    chosen = [(k, v) for k, v in sources if v]
    if len(chosen) != 1:
        raise ConfigError("exactly one model source is required "
                          "(--builtin | --mlp | --subprocess | --http)")
    kind, value = chosen[0]
    if kind == "builtin":
        if not args.dim:
            raise ConfigError("--builtin models need --dim")
        params = dict(_parse_param(kv) for kv in args.param)
        try:
            model = builtin(value, args.dim, **params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    elif kind == "mlp":
        model = load_mlp(value)
    else:
        model = connect_external(value, n=args.dim, timeout=args.timeout)
    if args.quantize_pixels:
        model = model.with_domain(pixel_domain())
    return model


def build_spec(args):
    try:
        return BallSpec(scheme=args.scheme, radius=args.r,
                        sample_fraction=args.fraction, seed=args.seed,
                        circle_points=args.circle_points)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_projection(args):
    if args.projection is None:
        return None
    return OutputProjection(args.projection, args.component)


def build_region(args, seed_default=0):
    if not args.region:
        raise ConfigError("this command needs --region lo:hi,lo:hi,...")
    bounds = parse_region(args.region)
    if args.grid and args.mc:
        raise ConfigError("choose one of --grid or --mc")
    if args.grid:
        counts = tuple(parse_int_list(args.grid))
        sampling = gamma.GridSampling(counts)
    elif args.mc:
        sampling = gamma.MonteCarloSampling(args.mc, args.region_seed)
    else:
        raise ConfigError("this command needs --grid or --mc sampling")
    try:
        return gamma.RegionSpec(bounds, sampling)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _outdir(args):
    out = Path(args.out) if getattr(args, "out", None) else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


class _Outputs:
    """Track written files so a strict-mode failure removes partial output."""

    def __init__(self):
        self.paths = []

    def add(self, path):
        self.paths.append(Path(path))
        return path

    def discard_all(self):
        for p in self.paths:
            try:
                p.unlink()
            except OSError:
                pass


def _load_vector(args):
    if args.stdin if hasattr(args, "stdin") else False:
        return parse_vector(sys.stdin.read().strip())
    if getattr(args, "x", None):
        return parse_vector(args.x)
    raise ConfigError("provide the input with --x or --stdin")


def cmd_point(args):
    model = build_model(args)
    x = _load_vector(args)
    res = gamma.gamma_point(model, x, build_spec(args), build_projection(args))
    print(json.dumps({"gamma": res.gamma, "stderr": res.stderr,
                      "ball_count": res.ball_count}))
    return 0


def cmd_region(args):
    model = build_model(args)
    region = build_region(args)
    out = _outdir(args)
    written = _Outputs()
    try:
        res = gamma.gamma_region(model, region, build_spec(args),
                                 build_projection(args), jobs=resolve_jobs(args),
                                 lenient=args.lenient,
                                 collect_points=args.per_point)
        path = out / "region_summary.csv"
        with open(written.add(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mean_gamma", "stderr", "count", "skipped"])
            w.writerow([repr(res.mean_gamma), repr(res.stderr), res.count,
                        len(res.failures)])
        if args.per_point:
            gamma.write_per_point_csv(res, written.add(out / "region_points.csv"),
                                      region.ndim)
    except HarmonicaError:
        written.discard_all()
        raise
    print(f"mean_gamma={res.mean_gamma!r} stderr={res.stderr!r} "
          f"count={res.count} skipped={len(res.failures)}")
    return 0


def cmd_field(args):
    model = build_model(args)
    region = build_region(args)
    if not isinstance(region.sampling, gamma.GridSampling):
        raise ConfigError("field needs --grid sampling")
    out = _outdir(args)
    written = _Outputs()
    try:
        field = gamma.gamma_field(model, region, build_spec(args),
                                  build_projection(args),
                                  jobs=resolve_jobs(args), lenient=args.lenient)
        gamma.write_field_csv(field, written.add(out / "field.csv"))
    except HarmonicaError:
        written.discard_all()
        raise
    vals = field.values[np.isfinite(field.values)]
    print(f"nodes={field.values.size} mean_gamma={float(vals.mean())!r} "
          f"max_gamma={float(vals.max())!r}")
    return 0


def cmd_sweep(args):
    model = build_model(args)
    region = build_region(args)
    radii = parse_float_list(args.radii)
    if not radii or any(r <= 0 for r in radii):
        raise ConfigError("--radii needs positive values")
    out = _outdir(args)
    written = _Outputs()
    try:
        rows = gamma.radius_sweep(model, region, radii, build_spec(args),
                                  build_projection(args),
                                  jobs=resolve_jobs(args), lenient=args.lenient)
        gamma.write_sweep_csv(rows, written.add(out / "sweep.csv"))
    except HarmonicaError:
        written.discard_all()
        raise
    for r, mean, err in rows:
        print(f"r={r!r} mean_gamma={mean!r} stderr={err!r}")
    return 0


def _image_size(args):
    if not args.image_size:
        raise ConfigError("image input needs --image-size W,H")
    w, h = parse_int_list(args.image_size)
    return w, h


def cmd_adv_search(args):
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    model = build_model(args)
    if args.pgm:
        w, h = _image_size(args)
        x = images.load_grayscale_image(args.pgm, w, h)
        if model.domain is None:
            model = model.with_domain(pixel_domain())
    else:
        x = _load_vector(args)
    out = _outdir(args)
    written = _Outputs()
    try:
        trace = adv.adversarial_search(model, x, build_spec(args), args.steps,
                                       build_projection(args),
                                       early_exit=args.early_exit)
        adv.write_trace_jsonl(trace, written.add(out / "trace.jsonl"))
        if args.dump_final:
            w, h = _image_size(args)
            images.write_pgm(written.add(out / args.dump_final),
                             images.vector_to_image(trace.final_point, w, h))
    except HarmonicaError:
        written.discard_all()
        raise
    print(json.dumps({"stable": trace.stable, "origin_label": trace.origin_label,
                      "final_label": trace.steps[-1].label,
                      "steps": len(trace.steps)}))
    return 0


def _load_dataset(args):
    if args.dataset and args.pgm_dir:
        raise ConfigError("choose one of --dataset or --pgm-dir")
    if args.dataset:
        try:
            arr = np.loadtxt(args.dataset, delimiter=",", ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read dataset {args.dataset}: {exc}") from exc
        labels = None
        if args.label_col is not None:
            col = args.label_col if args.label_col >= 0 else arr.shape[1] + args.label_col
            if not 0 <= col < arr.shape[1]:
                raise ConfigError(f"--label-col {args.label_col} out of range "
                                  f"for {arr.shape[1]} columns")
            labels = arr[:, col].astype(int).tolist()
            arr = np.delete(arr, col, axis=1)
        return [row for row in arr], labels, False
    if args.pgm_dir:
        w, h = _image_size(args)
        paths = sorted(Path(args.pgm_dir).glob("*.pgm"))
        if not paths:
            raise ConfigError(f"no .pgm files under {args.pgm_dir}")
        return [images.load_grayscale_image(p, w, h) for p in paths], None, True
    raise ConfigError("provide --dataset or --pgm-dir")


def cmd_adv_batch(args):
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    model = build_model(args)
    dataset, labels, is_images = _load_dataset(args)
    if is_images and model.domain is None:
        model = model.with_domain(pixel_domain())
    out = _outdir(args)
    written = _Outputs()
    try:
        stats, records = adv.batch_stability(
            model, dataset, build_spec(args), args.steps,
            build_projection(args), true_labels=labels, seed=args.seed,
            jobs=resolve_jobs(args), lenient=args.lenient,
            early_exit=args.early_exit)
        adv.write_stability_csv(stats, written.add(out / "stability.csv"))
        adv.write_records_csv(records, written.add(out / "records.csv"))
        if args.traces:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            for rec in records:
                trace = adv.adversarial_search(
                    model, dataset[rec.index], build_spec(args), args.steps,
                    build_projection(args),
                    seed=gamma.derive_seed(args.seed, rec.index, 0),
                    early_exit=args.early_exit)
                adv.write_trace_jsonl(
                    trace, written.add(tdir / f"sample_{rec.index:05d}.jsonl"))
    except HarmonicaError:
        written.discard_all()
        raise
    for s in stats:
        acc = "n/a" if s.accuracy_pct is None else f"{s.accuracy_pct:.1f}"
        print(f"class={s.class_id} count={s.count} accuracy_pct={acc} "
              f"stability_pct={s.stability_pct:.1f} mean_gamma={s.mean_gamma!r}")
    return 0


def cmd_map(args):
    rows = None
    try:
        rows = adv.read_records_csv(args.records)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read records {args.records}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{args.records} holds no records")
    prob_edges = np.linspace(0.0, 1.0, args.prob_bins + 1)
    gammas = np.array([g for _, g, _ in rows])
    top = float(np.percentile(gammas, 99)) or max(float(gammas.max()), 1e-12)
    gamma_edges = np.linspace(0.0, top, args.gamma_bins + 1)
    gmap = analysis.build_gamma_map(rows, prob_edges, gamma_edges)
    out = _outdir(args)
    analysis.write_gamma_map_csv(gmap, out / "gamma_map.csv")
    if args.lookup:
        p, g = parse_float_list(args.lookup)
        frac = analysis.lookup_stability(gmap, p, g, nearest_nonempty=args.nearest)
        print("n/a" if frac is None else repr(frac))
    else:
        occupied = int((gmap.counts > 0).sum())
        print(f"records={gmap.counts.sum()} occupied_cells={occupied}")
    return 0


def cmd_bench_coverage(args):
    dims = parse_int_list(args.dims)
    if not dims or any(d < 2 for d in dims):
        raise ConfigError("--dims needs integers >= 2")
    out = _outdir(args)
    path = out / "coverage.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "scheme", "centrality", "centrality_stderr",
                    "isotropy", "isotropy_stderr"])
        for n in dims:
            center = np.zeros(n)
            c, iso = coverage_metrics(
                ball_points(center, BallSpec("simplex", 1.0)), center)
            w.writerow([n, "simplex", repr(c), repr(0.0), repr(iso), repr(0.0)])
            cs, isos = [], []
            for seed in range(args.coverage_seeds):
                pts = ball_points(center, BallSpec("random", 1.0, seed=seed))
                c, iso = coverage_metrics(pts, center)
                cs.append(c)
                isos.append(iso)
            cs, isos = np.array(cs), np.array(isos)
            k = args.coverage_seeds
            w.writerow([n, "random", repr(float(cs.mean())),
                        repr(float(cs.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0),
                        repr(float(isos.mean())),
                        repr(float(isos.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0)])
    print(f"wrote {path}")
    return 0


def cmd_simplex(args):
    try:
        basis = simplex_vertices(args.n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _outdir(args)
    path = out / "simplex.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"v{i}" for i in range(args.n)])
        for row in basis.vertices:
            w.writerow([repr(float(c)) for c in row])
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "point": cmd_point,
    "region": cmd_region,
    "field": cmd_field,
    "sweep": cmd_sweep,
    "adv-search": cmd_adv_search,
    "adv-batch": cmd_adv_batch,
    "map": cmd_map,
    "bench-coverage": cmd_bench_coverage,
    "simplex": cmd_simplex,
}


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)

    # Config file values become parser defaults, so explicit flags win.
    if "--config" in argv:
        try:
            cfg_path = argv[argv.index("--config") + 1]
        except IndexError:
            print(f"{PROG}: --config needs a path", file=sys.stderr)
            return 2
        try:
            parser.set_defaults(**load_config(cfg_path))
        except ConfigError as exc:
            print(f"{PROG}: {exc}", file=sys.stderr)
            return 2

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, EmptyBallError, ValueError) as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 2
    except EvaluationError as exc:
        cause = exc.__cause__
        code = 4 if isinstance(cause, ModelOutputError) else 3
        print(f"{PROG}: {exc}", file=sys.stderr)
        return code
    except ModelOutputError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 4
    except BackendError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(f"{PROG}: backend diagnostics: {exc.diagnostics}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
