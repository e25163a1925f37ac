"""Command-line entry point: ``dualsdp <command> ...``.

JSON and CSV go to stdout or files, logs to stderr. Exit codes: 0 ok,
1 verification failure, 2 I/O error, 3 invalid input, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import mlp
from .completion import Prediction, complete
from .data import LoadInstance, generate_instances, read_instances, write_instances
from .dual import TOL_CONE, TOL_EQ, TOL_PSD, DualSolution, dual_objective, verify_dual
from .grid import validate_network
from .hermitian import EigenConvergenceError
from .matpower import load_network
from .oracle import GridConfig, brute_force_opf
from .training import (
    BoundVerificationError,
    TrainingDivergedError,
    evaluate,
    new_model,
    read_refs,
    train,
    write_eval_csv,
    write_history,
)

log = logging.getLogger("dualsdp")

EXIT_OK, EXIT_VERIFY, EXIT_IO, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def _tolerances(args) -> dict:
    return {"tol_eq": args.tol_eq, "tol_cone": args.tol_cone, "tol_psd": args.tol_psd}


def _network(args):
    if not args.case:
        raise CliError("--case is required", EXIT_INVALID)
    net = load_network(args.case)
    problems = validate_network(net)
    if problems:
        raise CliError("invalid network: " + "; ".join(problems), EXIT_INVALID)
    return net


def _read_bytes(path) -> bytes:
    return Path(path).read_bytes()


def _load_model(args, net):
    if not args.model:
        log.info("no --model given, using the zero prediction")
        return new_model(net, output_gain=0.0)
    model = mlp.load(_read_bytes(args.model))
    if model.n_inputs != 2 * net.n_bus or model.n_outputs != Prediction.size(net):
        raise CliError(f"model shape {model.layer_sizes} does not fit network {net.name}", EXIT_INVALID)
    return model


def _instance(args, net) -> LoadInstance:
    """``--instance`` (a JSON object or the first JSON line), else ``--data`` with ``--id``, else the reference load."""
    if args.instance:
        text = Path(args.instance).read_text().strip()
        try:
            rec = json.loads(text)
        except ValueError:
            rec = json.loads(text.splitlines()[0])
        inst = LoadInstance(rec["p_d"], rec["q_d"], id=int(rec.get("id", 0)))
    elif args.data:
        data = read_instances(args.data)
        match = [i for i in data.instances if i.id == args.id]
        if not match:
            raise CliError(f"instance id {args.id} not found in {args.data}", EXIT_INVALID)
        inst = match[0]
    else:
        inst = LoadInstance.reference(net)
    if inst.p_d.shape != (net.n_bus,):
        raise CliError(f"instance has {inst.p_d.size} buses, network has {net.n_bus}", EXIT_INVALID)
    return inst


def cmd_parse(args) -> int:
    net = load_network(args.case)
    problems = validate_network(net)
    _emit({**net.summary(), "valid": not problems, "problems": problems})
    return EXIT_OK if not problems else EXIT_INVALID


def cmd_datagen(args) -> int:
    net = _network(args)
    data = generate_instances(net, args.n, seed=args.seed)
    write_instances(args.out, data)
    counts = {s: data.splits.count(s) for s in ("train", "val", "test")}
    _emit({"out": str(args.out), "n": len(data), "seed": args.seed, "splits": counts})
    return EXIT_OK


def cmd_train(args) -> int:
    net = _network(args)
    data = read_instances(args.data)
    hidden = tuple(int(h) for h in args.hidden.split(",") if h)
    model = new_model(net, hidden=hidden, seed=args.seed, output_gain=args.output_gain, instances=data.train)
    model, hist = train(
        net,
        model,
        data,
        epochs=args.epochs,
        batch=args.batch,
        lr=args.lr,
        patience=args.patience,
        seed=args.seed,
        weight_decay=args.weight_decay,
        tolerances=_tolerances(args),
    )
    Path(args.out).write_bytes(mlp.save(model))
    if args.history:
        write_history(args.history, hist)
    _emit(
        {
            "out": str(args.out),
            "epochs_run": len(hist.epochs),
            "best_epoch": hist.best_epoch,
            "best_val_bound": hist.best_val_bound,
            "initial_val_bound": hist.initial_val_bound,
            "stopped_early": hist.stopped_early,
        }
    )
    return EXIT_OK


def cmd_bound(args) -> int:
    net = _network(args)
    model = _load_model(args, net)
    inst = _instance(args, net)
    t0 = time.perf_counter()
    y, _ = mlp.forward(model, inst.features[None, :])
    sol, _ = complete(net, Prediction.from_vector(net, y[0]), inst)
    report = verify_dual(net, inst, sol, **_tolerances(args))
    ms = 1000.0 * (time.perf_counter() - t0)
    if args.out:
        Path(args.out).write_text(sol.to_json())
    out = {"instance_id": inst.id, "feasibility_report": report.to_dict(), "wall_time_ms": ms}
    if not report.passed:
        # never hand out a bound without a passing certificate
        out["bound"] = None
        _emit(out)
        return EXIT_VERIFY
    out["bound"] = sol.objective
    _emit(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    net = _network(args)
    if not args.dual:
        raise CliError("--dual is required", EXIT_INVALID)
    sol = DualSolution.from_json(Path(args.dual).read_text())
    sol.check_shapes(net)
    inst = _instance(args, net)
    report = verify_dual(net, inst, sol, **_tolerances(args))
    out = {"feasibility_report": report.to_dict()}
    # feasibility does not depend on the load, the bound does
    if report.passed and (args.instance or args.data):
        out["bound"] = dual_objective(net, inst, sol)
    _emit(out)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_oracle(args) -> int:
    net = _network(args)
    inst = _instance(args, net)
    res = brute_force_opf(net, inst, GridConfig(steps=args.grid_steps, refinements=args.refinements))
    _emit({"instance_id": inst.id, **res.to_dict()})
    return EXIT_OK


def cmd_eval(args) -> int:
    net = _network(args)
    model = _load_model(args, net)
    data = read_instances(args.data)
    instances = data.subset(args.split) if args.split != "all" else data.instances
    refs = read_refs(args.refs) if args.refs else None
    result = evaluate(net, model, instances, refs, tolerances=_tolerances(args))
    if args.out:
        write_eval_csv(args.out, result)
    _emit({"n": len(result.rows), "mean_bound": float(np.mean(result.bounds)) if result.rows else None,
           "summary": result.summary, "out": args.out, "tolerances": _tolerances(args)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", help="MATPOWER case file")
    common.add_argument("--data", help="instance file (JSON lines)")
    common.add_argument("--model", help="model JSON file")
    common.add_argument("--refs", help="reference objectives CSV")
    common.add_argument("--out", help="output path")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol-eq", type=float, default=TOL_EQ)
    common.add_argument("--tol-cone", type=float, default=TOL_CONE)
    common.add_argument("--tol-psd", type=float, default=TOL_PSD)
    common.add_argument("--instance", help="single instance JSON {id, p_d, q_d}")
    common.add_argument("--id", type=int, default=0, help="instance id to pick from --data")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dualsdp", description="Learned dual-feasible lower bounds for AC-OPF.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("parse", parents=[common], help="parse a case and print a summary")
    s = sub.add_parser("datagen", parents=[common], help="generate perturbed load instances")
    s.add_argument("--n", type=int, default=1000)
    s = sub.add_parser("train", parents=[common], help="train a bound predictor")
    s.add_argument("--epochs", type=int, default=200)
    s.add_argument("--batch", type=int, default=64)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--patience", type=int, default=20)
    s.add_argument("--hidden", default="64,64")
    s.add_argument("--weight-decay", type=float, default=0.0)
    s.add_argument("--output-gain", type=float, default=0.1)
    s.add_argument("--history", help="per-epoch history CSV")
    sub.add_parser("bound", parents=[common], help="verified lower bound for one instance")
    s = sub.add_parser("verify", parents=[common], help="check a dual solution JSON")
    s.add_argument("--dual", help="dual solution JSON (defaults to --out of a previous bound run)")
    s = sub.add_parser("oracle", parents=[common], help="brute-force AC-OPF on a tiny network")
    s.add_argument("--grid-steps", type=int, default=GridConfig.steps)
    s.add_argument("--refinements", type=int, default=GridConfig.refinements)
    s = sub.add_parser("eval", parents=[common], help="bound a split and write a metrics CSV")
    s.add_argument("--split", default="test", choices=["train", "val", "test", "all"])
    return p


COMMANDS = {
    "parse": cmd_parse,
    "datagen": cmd_datagen,
    "train": cmd_train,
    "bound": cmd_bound,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(message)s"
    )
    np.random.seed(args.seed)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        log.error("%s", exc)
        return exc.code
    except BoundVerificationError as exc:
        log.error("%s", exc)
        _emit({"bound": None, "feasibility_report": exc.report.to_dict()})
        return EXIT_VERIFY
    except (EigenConvergenceError, TrainingDivergedError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
