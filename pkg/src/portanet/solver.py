"""SGD with momentum, learning-rate policies and the training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import engine
from .blob import Blob, blob_update
from .config import SolverSpec
from .data import BatchIterator, Dataset
from .engine import kernel
from .errors import ShapeError
from .net import Net
from .snapshot import snapshot_save

log = logging.getLogger(__name__)


@dataclass
class SolverState:
    iter: int = 0
    history: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_blobs(cls, blobs: Sequence[Blob]) -> "SolverState":
        return cls(0, [np.zeros(b.shape, np.float32) for b in blobs])


@kernel
def _momentum(lo, hi, history, diff, data, lr, momentum, decay):
    for i in range(lo, hi):
        g = diff[i] + decay * data[i]
        v = momentum * history[i] + lr * g
        history[i] = v
        diff[i] = v


def sgd_step(state: SolverState, solver: SolverSpec, learnables: Sequence[Blob]) -> None:
    """One update of every learnable blob, then ``state.iter += 1``.

    g = diff + weight_decay·data; v = momentum·v + lr·g; data -= v.
    The velocity is staged in ``diff`` and applied by ``blob_update``.
    """
    if len(state.history) != len(learnables):
        raise ShapeError("solver state does not match the learnable blobs")
    lr = np.float32(solver.learning_rate(state.iter))
    mom = np.float32(solver.momentum)
    decay = np.float32(solver.weight_decay)
    for hist, blob in zip(state.history, learnables):
        if hist.shape != blob.shape:
            raise ShapeError(f"momentum buffer {hist.shape} does not match {blob.name} {blob.shape}")
        engine.for_each_index(blob.count(), _momentum,
                              outputs=(hist.reshape(-1), blob.diff.array.reshape(-1)),
                              inputs=(blob.data.array.reshape(-1),), args=(lr, mom, decay))
        blob_update(blob)
    state.iter += 1


@dataclass(frozen=True)
class Metric:
    iter: int
    loss: float
    accuracy: float

    def __str__(self) -> str:
        return f"iter={self.iter} loss={self.loss:.9g} acc={self.accuracy:.9g}"


def accuracy_of(outputs: dict) -> float:
    for name, value in outputs.items():
        if "acc" in name and isinstance(value, float):
            return value
    return float("nan")


def evaluate(net: Net, ds: Dataset, batches: Optional[int] = None) -> tuple[float, float]:
    """Mean loss and accuracy over consecutive batches from the start of ``ds``.

    At most as many whole batches as fit in the dataset are used, so no
    sample is counted twice; ``batches`` can lower that number.
    """
    it = BatchIterator(ds, net.batch, shuffle=False)
    whole = max(1, len(ds) // net.batch)
    batches = whole if batches is None else max(1, min(batches, whole))
    loss_sum = 0.0
    acc_sum = 0.0
    for _ in range(batches):
        loss, outputs = net.forward(*it.next_batch())
        loss_sum += loss
        acc_sum += accuracy_of(outputs)
    return loss_sum / batches, acc_sum / batches


def snapshot_name(path: Path, it: int) -> Path:
    return path.with_name(f"{path.stem}_iter{it}{path.suffix}")


def train(net: Net, solver: SolverSpec, train_set: Dataset,
          test_net: Optional[Net] = None, test_set: Optional[Dataset] = None,
          snapshot_path=None, state: Optional[SolverState] = None,
          on_metric: Optional[Callable[[Metric], None]] = None,
          on_step: Optional[Callable[[int, float], None]] = None
          ) -> tuple[SolverState, list[Metric]]:
    """Run ``solver.max_iter`` forward/backward/update steps.

    When a test net and set are given, every ``test_interval`` steps (and at
    the start and the end) ``test_iter`` test batches are evaluated and a
    :class:`Metric` is recorded. ``on_step`` receives (iteration, train loss).
    """
    learnables = net.learnables
    state = state or SolverState.for_blobs(learnables)
    batches = BatchIterator(train_set, net.batch, seed=solver.seed)
    metrics: list[Metric] = []
    testing = test_net is not None and test_set is not None and solver.test_interval > 0

    def run_test():
        test_net.copy_params_from(net)
        loss, acc = evaluate(test_net, test_set, solver.test_iter or None)
        m = Metric(state.iter, loss, acc)
        metrics.append(m)
        log.info("%s", m)
        if on_metric:
            on_metric(m)

    snap = Path(snapshot_path) if snapshot_path else None
    while state.iter < solver.max_iter:
        if testing and state.iter % solver.test_interval == 0:
            run_test()
        net.clear_param_diffs()
        loss, _ = net.forward(*batches.next_batch())
        net.backward()
        sgd_step(state, solver, learnables)
        if on_step:
            on_step(state.iter, loss)
        if solver.display and state.iter % solver.display == 0:
            log.info("iter %d, train loss %.6f", state.iter, loss)
        if (snap is not None and solver.snapshot_interval
                and state.iter % solver.snapshot_interval == 0 and state.iter < solver.max_iter):
            snapshot_save(net, snapshot_name(snap, state.iter))
    if testing and (not metrics or metrics[-1].iter != state.iter):
        run_test()
    if snap is not None:
        snapshot_save(net, snap)
    return state, metrics
