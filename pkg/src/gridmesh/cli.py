"""Command-line entry point.

Subcommands: train, reconstruct, eval, artifact-study, toy2d. Every
subcommand accepts ``--config FILE`` with flat ``key = value`` lines whose
keys are the long flag names; flags given on the command line win.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def thread_count():
    raw = os.environ.get("GRIDMESH_THREADS")
    if raw is None or raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"GRIDMESH_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"GRIDMESH_THREADS must be a positive integer, got {raw!r}")
    return n


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _resolution(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"resolution must be at least 2, got {text}")
    return v


def _emit(doc, schema_name, out_path=None):
    from gridmesh.config import validate

    validate(doc, schema_name)
    text = json.dumps(doc, indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _shape(spec):
    from gridmesh.oracle import parse_shape

    try:
        return parse_shape(spec)
    except (OSError, DataError):
        raise
    except ValueError as err:
        if spec.strip().lower().startswith(("mesh", "triangle-soup")):
            raise DataError(str(err)) from None
        raise UsageError(str(err)) from None


# -- subcommands -------------------------------------------------------------


def cmd_train(args):
    from gridmesh.config import validate
    from gridmesh.training import TrainConfig, train

    if not args.shape:
        raise UsageError("train: at least one --shape is required")
    shapes = [_shape(s) for s in args.shape]
    cfg = TrainConfig(
        pairs_per_iter=args.pairs_per_iter,
        epochs=args.epochs,
        iters_per_epoch=args.iters_per_epoch,
        lr0=args.lr0,
        seed=args.seed,
        sign_weight=args.sign_weight,
        alpha_weight=args.alpha_weight,
        cloud_points=args.cloud_points,
        edge_length=args.edge_length,
        dim=args.dim,
    )
    out = args.out or "gridmesh-train"

    def log(rec):
        validate(rec, "train_log_record")
        print(json.dumps(rec), file=sys.stderr)

    _, records = train(shapes, cfg, out_dir=out, log=log)
    doc = {
        "command": "train",
        "shapes": list(args.shape),
        "checkpoint": os.path.join(out, "model.json"),
        "log": os.path.join(out, "train_log.jsonl"),
        "config": asdict(cfg),
        "final": records[-1],
    }
    _emit(doc, "train_summary")


def _predictor(args, shape, cloud):
    from gridmesh.predictors import OraclePredictor

    if args.oracle and args.checkpoint:
        raise UsageError("reconstruct: --oracle and --checkpoint are exclusive")
    if args.oracle:
        if shape is None:
            raise UsageError("reconstruct: --oracle needs --shape")
        return OraclePredictor(shape), None
    if args.checkpoint:
        from gridmesh.model import CheckpointError, ModelPredictor, load_checkpoint

        try:
            model, payload = load_checkpoint(args.checkpoint)
        except CheckpointError as err:
            raise DataError(str(err)) from None
        return ModelPredictor(model, cloud), payload
    raise UsageError("reconstruct: pass --oracle or --checkpoint")


def cmd_reconstruct(args):
    from gridmesh.geometry import Aabb
    from gridmesh.mesher import postprocess, reconstruct, topology_report, write_edge_csv
    from gridmesh.meshio import load_cloud, save_mesh
    from gridmesh.sampler import active_cubes, enumerate_lattice

    if not args.shape and not args.cloud:
        raise UsageError("reconstruct: pass --shape or --cloud")
    shape = _shape(args.shape) if args.shape else None
    cloud = load_cloud(args.cloud) if args.cloud else shape.sample_surface(args.cloud_points, args.seed)
    predictor, payload = _predictor(args, shape, cloud)
    bbox = shape.bbox() if shape is not None else Aabb.of(cloud.points)
    lattice = enumerate_lattice(bbox, args.res)
    cubes = active_cubes(lattice, cloud, args.dilation)
    mesh, sol, _ = reconstruct(lattice, cubes, predictor)
    if mesh.n_triangles == 0:
        raise DataError("reconstruction produced no triangles")
    raw_triangles = mesh.n_triangles
    if not args.no_postprocess:
        mesh = postprocess(mesh, args.k, args.threshold)
    out = args.out or "reconstruction.obj"
    save_mesh(out, mesh)
    if args.edges_csv:
        write_edge_csv(args.edges_csv, lattice, sol)
    doc = {
        "command": "reconstruct",
        "mesh": out,
        "predictor": "oracle" if args.oracle else "model",
        "resolution": args.res,
        "cell": lattice.cell,
        "active_cubes": int(cubes.shape[0]),
        "edges": int(len(sol)),
        "crossing_edges": int(sol.crossing.sum()),
        "triangles_before_postprocess": int(raw_triangles),
        "postprocess": not args.no_postprocess,
        "seed": args.seed,
    }
    if args.audit:
        doc["topology"] = topology_report(mesh)
    _emit(doc, "reconstruct_report")


def cmd_eval(args):
    from gridmesh.meshio import load_mesh
    from gridmesh.metrics import evaluate

    if not args.shape:
        raise UsageError("eval: --shape (a shape spec or mesh:path=FILE) is required")
    rec = load_mesh(args.mesh)
    gt = _shape(args.shape)
    rep = evaluate(rec, gt, args.samples, args.seed)
    doc = {"command": "eval", "mesh": args.mesh, "reference": args.shape, **rep.to_dict()}
    _emit(doc, "eval_report", args.out)


def cmd_artifact_study(args):
    from gridmesh.experiments import artifact_study

    shape = _shape(args.shape or "sphere")
    if not shape.watertight:
        raise UsageError("artifact-study needs a watertight shape")
    table = artifact_study(shape, args.res, args.seed, args.samples, args.cloud_points, args.dilation)
    doc = {"command": "artifact-study", "shape": args.shape or "sphere", **table}
    _emit(doc, "artifact_study", args.out)


def cmd_toy2d(args):
    from gridmesh.experiments import Toy2dConfig, toy2d

    cfg = Toy2dConfig(
        n_points=args.samples, lr=args.lr, steps=args.epochs, radius=args.radius, seed=args.seed
    )
    fields = ("sdf", "udf") if args.field == "both" else (args.field,)
    doc = {"command": "toy2d", **toy2d(cfg, fields)}
    _emit(doc, "toy2d_profile", args.out)


# -- parser ------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="gridmesh", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, seed=0):
        sp.add_argument("--config", help="flat key = value file; command-line flags take precedence")
        sp.add_argument("--seed", type=int, default=seed)
        sp.add_argument("--out")

    t = sub.add_parser("train", help="train the pair predictor on oracle shapes")
    common(t)
    t.add_argument("--shape", action="append", default=[], help="shape spec; repeat for several")
    t.add_argument("--epochs", type=_positive_int, default=20)
    t.add_argument("--iters-per-epoch", type=_positive_int, default=50)
    t.add_argument("--pairs-per-iter", type=_positive_int, default=4000)
    t.add_argument("--lr0", type=float, default=1e-3)
    t.add_argument("--dim", type=_positive_int, default=64)
    t.add_argument("--sign-weight", type=float, default=1.0)
    t.add_argument("--alpha-weight", type=float, default=1.0)
    t.add_argument("--cloud-points", type=_positive_int, default=3000)
    t.add_argument("--edge-length", type=float, default=1.0 / 64)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("reconstruct", help="mesh a point cloud or shape")
    common(r)
    r.add_argument("--shape")
    r.add_argument("--cloud", help="input point cloud (.xyz, .ply, .obj)")
    r.add_argument("--oracle", action="store_true", help="use ground-truth labels from --shape")
    r.add_argument("--checkpoint")
    r.add_argument("--res", type=_resolution, default=64)
    r.add_argument("--dilation", type=int, default=3)
    r.add_argument("--cloud-points", type=_positive_int, default=3000)
    r.add_argument("--no-postprocess", action="store_true")
    r.add_argument("--k", type=_positive_int, default=10)
    r.add_argument("--threshold", type=float, default=0.65)
    r.add_argument("--edges-csv", help="dump edge solutions as CSV")
    r.add_argument("--audit", action="store_true", help="include a topology report")
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("eval", help="CD1 and NC of a mesh against a reference")
    common(e)
    e.add_argument("mesh")
    e.add_argument("--shape")
    e.add_argument("--samples", type=_positive_int, default=20000)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("artifact-study", help="GT signs with GT, random and UDF-ratio alphas")
    common(a)
    a.add_argument("--shape")
    a.add_argument("--res", type=_resolution, default=64)
    a.add_argument("--samples", type=_positive_int, default=20000)
    a.add_argument("--cloud-points", type=_positive_int, default=3000)
    a.add_argument("--dilation", type=int, default=3)
    a.set_defaults(func=cmd_artifact_study)

    y = sub.add_parser("toy2d", help="fit SDF and UDF of a circle with a small MLP")
    common(y)
    y.add_argument("--field", choices=("sdf", "udf", "both"), default="both")
    y.add_argument("--samples", type=_positive_int, default=20000)
    y.add_argument("--epochs", type=_positive_int, default=2000, help="full-batch Adam steps")
    y.add_argument("--lr", type=float, default=1e-3)
    y.add_argument("--radius", type=float, default=1.0)
    y.set_defaults(func=cmd_toy2d)
    return p, sub


def _apply_config(parser, sub, argv):
    """Re-parse with config-file values as defaults so explicit flags win."""
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required")
    if not getattr(args, "config", None):
        return args
    from gridmesh.config import ConfigError, read_config

    sp = sub.choices[args.command]
    try:
        entries = read_config(args.config)
    except OSError as err:
        raise DataError(f"cannot read config: {err}") from None
    except ConfigError as err:
        raise UsageError(str(err)) from None
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config", "func")}
    defaults = {}
    for key, values in entries.items():
        act = actions.get(key)
        if act is None or not act.option_strings:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        conv = act.type or (lambda v: v)
        try:
            if isinstance(act, argparse._StoreTrueAction):
                parsed = [v.lower() in ("1", "true", "yes", "on") for v in values]
            else:
                parsed = [conv(v) for v in values]
        except (ValueError, argparse.ArgumentTypeError) as err:
            raise UsageError(f"bad value for config key {key!r}: {err}") from None
        if isinstance(act, argparse._AppendAction):
            defaults[key] = parsed
        elif len(parsed) > 1:
            raise UsageError(f"config key {key!r} given more than once")
        else:
            defaults[key] = parsed[0]
    sp.set_defaults(**defaults)
    args = parser.parse_args(argv)
    if isinstance(actions.get("shape"), argparse._AppendAction) and "shape" in defaults:
        # append actions extend a config default; explicit flags replace it instead
        explicit = args.shape[len(defaults["shape"]):]
        if explicit:
            args.shape = explicit
    return args


def main(argv=None):
    from gridmesh.geometry import GeometryError
    from gridmesh.meshio import MeshIOError

    parser, sub = build_parser()
    try:
        args = _apply_config(parser, sub, argv)
        threads = thread_count()
        import torch

        torch.set_num_threads(threads)
        args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, MeshIOError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except GeometryError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except RuntimeError as err:
        # meshing consistency failures
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
