"""``portanet train|test|time``: the command-line front end.

Results go to stdout as ``key=value`` lines; diagnostics go to stderr.
The exit status is 0 only when the requested operation completed.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, engine
from .config import SolverSpec, find_config, load_net, load_solver
from .data import Dataset, load_split, synthetic
from .errors import PortanetError
from .layers import DataParams
from .net import Net
from .snapshot import read_tensors, snapshot_load, write_tensors
from .solver import evaluate, train

log = logging.getLogger("portanet")

WARMUP = 5


def mean_path(snapshot: Path) -> Path:
    """Where the training-set mean image is kept next to a snapshot."""
    return snapshot.with_name(snapshot.name + ".mean")


def _policy(args) -> engine.Policy:
    if args.backend == "threads":
        return engine.Policy.multithreaded(args.threads)
    return engine.Policy.sequential()


def _net(args, batch_field: str, batch: Optional[int] = None) -> Net:
    spec = load_net(find_config(args.net))
    if batch is None:
        data = [ls for ls in spec.layers if ls.type == "data"]
        if data:
            batch = getattr(DataParams.from_options(data[0].options), batch_field)
    return Net(spec, batch=batch, seed=args.seed if args.seed is not None else 1)


def _require_dir(args, source: str) -> Path:
    if args.data_dir is None:
        raise PortanetError(f"--data-dir is required for {source} data")
    return Path(args.data_dir)


def _dataset(net: Net, args, split: str, mean=None, count: int = 1000) -> Dataset:
    p: DataParams = net.data_layer.params
    if p.source == "synthetic":
        # the test split uses another stream so it is not the training data
        seed = (args.seed or 0) + (0 if split == "train" else 1)
        return synthetic(max(count, net.batch), net.input_shape[1:], p.classes, seed)
    return load_split(p.source, _require_dir(args, p.source), split, mean)


def _emit(line: str) -> None:
    print(line, flush=True)


# -- subcommands ----------------------------------------------------------

def run_train(args) -> int:
    solver: SolverSpec = load_solver(find_config(args.solver))
    if args.seed is not None:
        solver = solver.replace(seed=args.seed)
    if args.iterations is not None:
        solver = solver.replace(max_iter=args.iterations)
    net = _net(args, "batch_size")
    test_net = _net(args, "test_batch_size")
    train_set = _dataset(net, args, "train")
    test_set = _dataset(test_net, args, "test", train_set.mean)
    snapshot = Path(args.snapshot or Path(args.net).stem + ".pnsn")
    snapshot.parent.mkdir(parents=True, exist_ok=True)
    if train_set.mean is not None:
        write_tensors(mean_path(snapshot), [train_set.mean])

    def on_step(it: int, loss: float) -> None:
        if solver.display and it % solver.display == 0:
            _emit(f"iter={it} train_loss={loss:.9g}")

    log.info("training %s for %d iterations with %s", net.name, solver.max_iter,
             engine.get_policy())
    train(net, solver, train_set, test_net, test_set, snapshot,
          on_metric=lambda m: _emit(str(m)), on_step=on_step)
    _emit(f"snapshot={snapshot}")
    return 0


def run_test(args) -> int:
    if args.snapshot is None:
        raise PortanetError("--snapshot is required")
    snapshot = Path(args.snapshot)
    net = _net(args, "test_batch_size")
    mean = None
    if net.data_layer.params.source == "cifar10" and mean_path(snapshot).exists():
        (mean,) = read_tensors(mean_path(snapshot))
    test_set = _dataset(net, args, "test", mean)
    snapshot_load(net, snapshot)
    batches = None
    if args.solver is not None:
        batches = load_solver(find_config(args.solver)).test_iter or None
    loss, acc = evaluate(net, test_set, batches)
    _emit(f"accuracy={acc:.9g} loss={loss:.9g}")
    return 0


def time_net(net: Net, iterations: int, warmup: int = WARMUP,
             images=None, labels=None) -> dict:
    """Mean per-layer forward/backward milliseconds over ``iterations`` passes.

    Each layer call is bracketed by a monotonic clock; the first ``warmup``
    passes are not counted.
    """
    n = len(net.layers)
    fwd = np.zeros(n)
    bwd = np.zeros(n)
    if images is not None:
        net.load_batch(images, labels)
    for step in range(warmup + iterations):
        record = step >= warmup
        net.clear_param_diffs()
        for i in range(n):
            t0 = time.perf_counter()
            net.forward_layer(i)
            if record:
                fwd[i] += time.perf_counter() - t0
        for i in reversed(range(n)):
            t0 = time.perf_counter()
            net.backward_layer(i)
            if record:
                bwd[i] += time.perf_counter() - t0
    scale = 1e3 / max(iterations, 1)
    return {
        "layers": [(layer.name, fwd[i] * scale, bwd[i] * scale)
                   for i, layer in enumerate(net.layers)],
        "forward_ms": fwd.sum() * scale,
        "backward_ms": bwd.sum() * scale,
    }


def format_timing(report: dict, policy: engine.Policy, batch: int, iterations: int) -> list[str]:
    lines = [f"layer={name} forward_ms={f:.4f} backward_ms={b:.4f}"
             for name, f, b in report["layers"]]
    total = report["forward_ms"] + report["backward_ms"]
    lines.append(f"average_forward_ms={report['forward_ms']:.4f} "
                 f"average_backward_ms={report['backward_ms']:.4f} "
                 f"average_forward_backward_ms={total:.4f} "
                 f"backend={'seq' if policy.kind == engine.SEQUENTIAL else 'threads'} "
                 f"threads={policy.threads} batch={batch} iterations={iterations}")
    return lines


def run_time(args) -> int:
    if args.iterations is not None and args.iterations < 1:
        raise PortanetError("--iterations must be >= 1")
    iterations = args.iterations or 50
    net = _net(args, "batch_size", args.batch)
    p: DataParams = net.data_layer.params
    if args.data_dir is not None and p.source != "synthetic":
        ds = load_split(p.source, args.data_dir, "train")
        images, labels = ds.images.array[:net.batch], ds.labels[:net.batch]
        if len(labels) < net.batch:
            raise PortanetError(f"dataset has fewer than {net.batch} samples")
    else:
        rng = np.random.default_rng(args.seed or 0)
        images = rng.random(net.input_shape, dtype=np.float32)
        labels = rng.integers(0, p.classes, net.batch)
    report = time_net(net, iterations, images=images, labels=labels)
    for line in format_timing(report, engine.get_policy(), net.batch, iterations):
        _emit(line)
    return 0


# -- argument parsing -----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--net", required=True,
                        help="net config file, or the name of a shipped one (e.g. mnist_lenet.cfg)")
    common.add_argument("--data-dir", help="directory holding the MNIST IDX or CIFAR-10 batch files")
    common.add_argument("--backend", choices=("seq", "threads"), default="seq")
    common.add_argument("--threads", type=int,
                        help="worker threads for --backend threads (default: PORTANET_THREADS "
                             "or the CPU count)")
    common.add_argument("--seed", type=int, help="overrides the solver and initialisation seed")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="portanet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a net with SGD")
    p.add_argument("--solver", required=True)
    p.add_argument("--snapshot", help="final snapshot path (default: <net>.pnsn)")
    p.add_argument("--iterations", type=int, help="overrides the solver's max_iter")
    p.set_defaults(run=run_train)

    p = sub.add_parser("test", parents=[common], help="evaluate a snapshot on the test split")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--solver", help="take the number of test batches from this solver")
    p.set_defaults(run=run_test)

    p = sub.add_parser("time", parents=[common], help="per-layer forward/backward timing")
    p.add_argument("--iterations", type=int, help="timed passes after %d warm-ups (default 50)" % WARMUP)
    p.add_argument("--batch", type=int, help="batch size (default: the data layer's batch_size)")
    p.set_defaults(run=run_time)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(name)s: %(message)s")
    try:
        with engine.use_policy(_policy(args)):
            return args.run(args)
    except (PortanetError, OSError) as exc:
        print(f"portanet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
