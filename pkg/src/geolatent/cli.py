"""Command-line driver for the GPCA + flow-matching pipeline.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import argparse
import dataclasses
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from . import datasets, evaluation, flowmatch, gpca, sampler
from .nn import load_mlp, save_mlp

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _coerce(value, default):
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(default, tuple):
        kind = type(default[0]) if default else float
        return tuple(kind(v) for v in value.split(",") if v.strip())
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def build_config(cls, path=None, overrides=None):
    """Dataclass config from an optional file, with non-``None`` overrides on top."""
    base = cls()
    raw = read_config(path) if path else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - fields
    if unknown:
        raise UsageError(f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in raw.items():
        default = getattr(base, key)
        try:
            kwargs[key] = _coerce(value, default) if isinstance(value, str) else value
        except ValueError:
            raise UsageError(f"bad value {value!r} for {key}") from None
    return dataclasses.replace(base, **kwargs)


def write_manifest(path, args):
    with open(path, "w") as f:
        for key, value in sorted(vars(args).items()):
            if key == "func":
                continue
            f.write(f"{key}={value}\n")


def _manifest_for(args, default_out):
    path = args.manifest or (f"{default_out}.manifest" if default_out else None)
    if path:
        write_manifest(path, args)


# -- commands ----------------------------------------------------------------

def cmd_toy_make(args):
    if args.n_samples < 1:
        raise UsageError("--n-samples must be >= 1")
    try:
        spec = datasets.ToySpec(args.kind, args.n_samples, args.categories, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = datasets.make_toy(spec)
    datasets.save_dataset(args.out, data)
    _manifest_for(args, args.out)
    print(data.n, data.c, data.N)


def _load_data(args):
    if args.format == "native":
        return datasets.load_dataset(args.data)
    if args.format == "idx":
        pad = (32, 32) if args.pad else None
        return datasets.load_idx_images(args.data, threshold=args.threshold, pad_to=pad)
    return datasets.load_sequences(args.data, alphabet=args.alphabet)


def _gpca_config(args):
    return build_config(gpca.GpcaConfig, args.config, {
        "seed": args.seed, "max_steps": args.max_steps, "epsilon": args.epsilon,
        "alpha": args.alpha, "label_smoothing": args.label_smoothing})


def cmd_gpca_fit(args):
    data = _load_data(args)
    limit = data.n * (data.c - 1)
    if not 1 <= args.dim <= limit:
        raise UsageError(f"--dim must lie in [1, {limit}] for this dataset")
    config = _gpca_config(args)
    model, report = gpca.fit(data, args.dim, config)
    model.save(args.out_model)
    report.write_csv(args.out_report)
    _manifest_for(args, args.out_model)
    print(f"steps={report.steps_run} hamming={report.final_hamming} "
          f"max_e_distance={report.final_max_e_distance!r} epsilon_met={report.epsilon_met}")
    if args.require_epsilon and not report.epsilon_met:
        print("epsilon criterion not met", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_fm_train(args):
    latent = gpca.LatentModel.load(args.model)
    config = build_config(flowmatch.FlowConfig, args.config, {
        "steps": args.steps, "batch_size": args.batch_size, "lr": args.lr, "seed": args.seed})
    model = flowmatch.FlowModel.create(latent, config)
    trained, trace = flowmatch.train(model, flowmatch.CouplingSampler(latent.Z, seed=config.seed), config)
    save_mlp(args.out_net, trained.net)
    with open(args.out_trace, "w") as f:
        f.write("step,loss\n")
        for i, loss in enumerate(trace, start=1):
            f.write(f"{i},{loss!r}\n")
    _manifest_for(args, args.out_net)
    print(f"steps={len(trace)} final_loss={trace[-1] if trace else float('nan')!r}")


def cmd_sample(args):
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    latent = gpca.LatentModel.load(args.model)
    model = flowmatch.FlowModel(load_mlp(args.net), latent)
    data = sampler.generate(model, args.count, steps=args.steps, seed=args.seed, method=args.method)
    datasets.save_dataset(args.out, data)
    if args.trajectory_out and args.count:
        z0 = np.random.default_rng(args.seed).standard_normal((args.count, latent.d))
        sampler.write_trajectory_csv(args.trajectory_out, sampler.integrate(model, z0, args.steps, args.method))
    _manifest_for(args, args.out)
    print(data.n, data.c, data.N)


def cmd_reconstruct(args):
    latent = gpca.LatentModel.load(args.model)
    data = _load_data(args)
    config = _gpca_config(args)
    Z = gpca.encode_with_fixed_basis(latent, data, config)
    _, labels = gpca.reconstruct(latent, Z)
    datasets.save_dataset(args.out, datasets.OneHotDataset(labels.reshape(data.N, data.n), data.c))
    err = gpca.reconstruction_error(latent, data, Z)
    _manifest_for(args, args.out)
    print(f"hamming={err} normalized={evaluation.normalized_hamming(err, data)!r}")


def _emit(args, lines):
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    sys.stdout.write(text)
    _manifest_for(args, args.out)


def cmd_eval_tv(args):
    a, b = datasets.load_dataset(args.data), datasets.load_dataset(args.reference)
    tv = evaluation.tv_distance(evaluation.joint_histogram(a), evaluation.joint_histogram(b))
    _emit(args, [f"tv={tv!r}"])


def cmd_eval_calibrate(args):
    spec = datasets.ToySpec(args.kind, args.n_samples, args.categories)
    _emit(args, [f"tv={evaluation.calibration_tv(spec, (args.seed, args.seed + 1))!r}"])


def cmd_eval_nearest(args):
    data = datasets.load_dataset(args.data)
    queries = datasets.load_dataset(args.samples)
    if not 0 <= args.index < queries.N:
        raise UsageError(f"--index must lie in [0, {queries.N})")
    idx, dist = evaluation.nearest_training(queries.labels[args.index], data, args.k)
    _emit(args, ["index,hamming"] + [f"{i},{d}" for i, d in zip(idx, dist)])


def cmd_eval_histogram(args):
    hist = evaluation.joint_histogram(datasets.load_dataset(args.data))
    evaluation.write_histogram_csv(args.out_csv, hist)
    if args.out_pgm:
        evaluation.write_pgm(args.out_pgm, hist)
    _manifest_for(args, args.out_csv)
    print(int(hist.sum()))


def cmd_eval_hamming_curve(args):
    data = _load_data(args)
    dims = [int(v) for v in args.dims.split(",")]
    rows = evaluation.hamming_curve(data, dims, _gpca_config(args))
    evaluation.write_curve_csv(args.out, rows)
    _manifest_for(args, args.out)
    for row in rows:
        print(",".join(str(v) for v in row))


# -- parser ------------------------------------------------------------------

def _data_options(p):
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("native", "idx", "sequences"), default="native")
    p.add_argument("--threshold", type=int, default=128)
    p.add_argument("--pad", action="store_true", help="zero-pad IDX images to 32x32")
    p.add_argument("--alphabet", default="ACGT")


def _gpca_options(p):
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--label-smoothing", type=float)


def build_parser():
    parser = _Parser(prog="geolatent", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--manifest", help="run-manifest path (default: <output>.manifest)")
        return p

    p = command("toy-make", cmd_toy_make, "write a discretized toy dataset")
    p.add_argument("--kind", required=True, choices=datasets.TOY_KINDS)
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--categories", type=int, default=92)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = command("gpca-fit", cmd_gpca_fit, "fit a GPCA latent subspace")
    _data_options(p)
    _gpca_options(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--require-epsilon", action="store_true")

    p = command("fm-train", cmd_fm_train, "train the latent flow-matching field")
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-net", required=True)
    p.add_argument("--out-trace", required=True)

    p = command("sample", cmd_sample, "generate discrete samples")
    p.add_argument("--model", required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--method", choices=sampler.METHODS, default="rk4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trajectory-out")

    p = command("reconstruct", cmd_reconstruct, "encode data with a fixed basis and round")
    p.add_argument("--model", required=True)
    _data_options(p)
    _gpca_options(p)
    p.add_argument("--out", required=True)

    p = command("eval", None, "evaluation metrics")
    metrics = p.add_subparsers(dest="metric", required=True, parser_class=_Parser)

    def metric(name, func):
        q = metrics.add_parser(name)
        q.set_defaults(func=func)
        q.add_argument("--manifest")
        return q

    q = metric("tv", cmd_eval_tv)
    q.add_argument("--data", required=True)
    q.add_argument("--reference", required=True)
    q.add_argument("--out")

    q = metric("calibrate", cmd_eval_calibrate)
    q.add_argument("--kind", required=True, choices=datasets.TOY_KINDS)
    q.add_argument("--n-samples", type=int, default=10000)
    q.add_argument("--categories", type=int, default=92)
    q.add_argument("--seed", type=int, default=1)
    q.add_argument("--out")

    q = metric("nearest", cmd_eval_nearest)
    q.add_argument("--data", required=True, help="training set")
    q.add_argument("--samples", required=True, help="dataset holding the query")
    q.add_argument("--index", type=int, default=0)
    q.add_argument("--k", type=int, default=5)
    q.add_argument("--out")

    q = metric("histogram", cmd_eval_histogram)
    q.add_argument("--data", required=True)
    q.add_argument("--out-csv", required=True)
    q.add_argument("--out-pgm")

    q = metric("hamming-curve", cmd_eval_hamming_curve)
    _data_options(q)
    _gpca_options(q)
    q.add_argument("--dims", required=True, help="comma-separated, ascending")
    q.add_argument("--out", required=True)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with threadpool_limits(limits=args.threads):
            return args.func(args) or EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except gpca.NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (datasets.DatasetError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
