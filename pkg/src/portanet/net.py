"""A linear chain of layers over a registry of named blobs."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .blob import Blob
from .config import NetSpec
from .errors import ConfigError, PortanetError, ShapeError
from .layers import LAYER_TYPES, DataLayer, Layer

Observer = Callable[[str, str], None]


class Net:
    """Layers in execution order plus the blobs they exchange.

    Built by :func:`net_build`. ``forward`` runs every layer once in order,
    ``backward`` runs them in reverse. Learnable parameter blobs are listed in
    ``learnables`` in layer order.
    """

    def __init__(self, spec: NetSpec, batch: Optional[int] = None, seed: int = 1):
        self.spec = spec
        self.name = spec.name
        self.layers: list[Layer] = []
        self.bottom_names: list[tuple[str, ...]] = []
        self.top_names: list[tuple[str, ...]] = []
        self.blobs: dict[str, Blob] = {}
        self.observer: Optional[Observer] = None
        self._from_data: set[str] = set()

        for ls in spec.layers:
            cls = LAYER_TYPES.get(ls.type)
            if cls is None:
                raise ConfigError(f"layer {ls.name!r}: unknown type {ls.type!r} "
                                  f"(known: {', '.join(sorted(LAYER_TYPES))})")
            layer = cls.from_options(ls.name, ls.options)
            lo, hi = cls.n_bottom
            if not lo <= len(ls.bottoms) <= hi:
                raise ConfigError(f"layer {ls.name!r} takes {lo}..{hi} bottoms, got {len(ls.bottoms)}")
            lo, hi = cls.n_top
            if not lo <= len(ls.tops) <= hi:
                raise ConfigError(f"layer {ls.name!r} takes {lo}..{hi} tops, got {len(ls.tops)}")
            for b in ls.bottoms:
                if b not in self.blobs:
                    raise ConfigError(f"layer {ls.name!r}: bottom blob {b!r} is not produced "
                                      "by any earlier layer")
            if isinstance(layer, DataLayer) and batch is not None:
                layer.batch = int(batch)
            try:
                shapes = layer.setup([self.blobs[b].shape for b in ls.bottoms])
            except PortanetError as exc:
                raise ShapeError(f"layer {ls.name!r}: {exc}") from exc
            for top, shape in zip(ls.tops, shapes):
                if top in self.blobs:
                    if top not in ls.bottoms:
                        raise ConfigError(f"layer {ls.name!r}: blob {top!r} is already defined")
                    if self.blobs[top].shape != tuple(shape):
                        raise ShapeError(f"layer {ls.name!r}: in-place top {top!r} changes shape")
                else:
                    self.blobs[top] = Blob(shape, top)
                if isinstance(layer, DataLayer):
                    self._from_data.add(top)
            self.layers.append(layer)
            self.bottom_names.append(tuple(ls.bottoms))
            self.top_names.append(tuple(ls.tops[:len(shapes)]))

        data_layers = [l for l in self.layers if isinstance(l, DataLayer)]
        if len(data_layers) != 1 or self.layers[0] is not data_layers[0]:
            raise ConfigError("a net needs exactly one data layer, placed first")
        self.data_layer: DataLayer = data_layers[0]
        self.init_params(seed)

    # -- parameters -------------------------------------------------------

    @property
    def learnables(self) -> list[Blob]:
        return [b for layer in self.layers for b in layer.blobs]

    def init_params(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            layer.init_params(rng)

    def clear_param_diffs(self) -> None:
        for b in self.learnables:
            b.diff.fill(0.0)

    def copy_params_from(self, other: "Net") -> None:
        mine, theirs = self.learnables, other.learnables
        if [b.shape for b in mine] != [b.shape for b in theirs]:
            raise ShapeError("nets have different parameter shapes")
        for dst, src in zip(mine, theirs):
            np.copyto(dst.data.array, src.data.array)

    # -- execution --------------------------------------------------------

    @property
    def batch(self) -> int:
        return self.data_layer.batch

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self.blobs[self.top_names[0][0]].shape

    def load_batch(self, images, labels=None) -> None:
        names = self.top_names[0]
        data = self.blobs[names[0]]
        images = np.asarray(images, dtype=np.float32)
        if images.shape != data.shape:
            raise ShapeError(f"batch has shape {images.shape}, data blob is {data.shape}")
        np.copyto(data.data.array, images)
        if labels is not None:
            if len(names) < 2:
                raise ShapeError("this net's data layer has no label output")
            lab = self.blobs[names[1]]
            labels = np.asarray(labels)
            if labels.size != lab.count():
                raise ShapeError(f"expected {lab.count()} labels, got {labels.size}")
            lab.data.array[...] = labels.reshape(lab.shape)

    def forward_layer(self, i: int) -> None:
        layer = self.layers[i]
        if self.observer:
            self.observer(layer.name, "forward")
        layer.forward([self.blobs[n] for n in self.bottom_names[i]],
                      [self.blobs[n] for n in self.top_names[i]])

    def backward_layer(self, i: int) -> None:
        layer = self.layers[i]
        if self.observer:
            self.observer(layer.name, "backward")
        bottoms = self.bottom_names[i]
        layer.backward([self.blobs[n] for n in self.top_names[i]],
                       [n not in self._from_data for n in bottoms],
                       [self.blobs[n] for n in bottoms])

    def forward(self, images=None, labels=None) -> tuple[float, dict[str, object]]:
        """Run all layers; return (total weighted loss, net outputs).

        Outputs are the blobs no later layer consumes: scalars come back as
        floats, anything larger as an array copy.
        """
        if images is not None:
            self.load_batch(images, labels)
        for i in range(len(self.layers)):
            self.forward_layer(i)
        return self.loss(), self.outputs()

    def backward(self) -> None:
        for i in reversed(range(len(self.layers))):
            self.backward_layer(i)

    def loss(self) -> float:
        total = 0.0
        for layer, tops in zip(self.layers, self.top_names):
            if layer.is_loss:
                total += float(layer.params.loss_weight) * float(self.blobs[tops[0]].data.array[0])
        return total

    def output_names(self) -> list[str]:
        consumed = {b for i, names in enumerate(self.bottom_names) for b in names
                    if b not in self.top_names[i]}
        seen = []
        for names in self.top_names[1:]:
            for n in names:
                if n not in consumed and n not in seen:
                    seen.append(n)
        return seen

    def outputs(self) -> dict[str, object]:
        out: dict[str, object] = {}
        for n in self.output_names():
            a = self.blobs[n].data.array
            out[n] = float(a.reshape(-1)[0]) if a.size == 1 else a.copy()
        return out

    def layer_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for layer in self.layers:
            counts[layer.type_name] = counts.get(layer.type_name, 0) + 1
        return counts

    def __repr__(self) -> str:
        return f"Net({self.name!r}, layers={[l.name for l in self.layers]})"


def net_build(spec: NetSpec, batch: Optional[int] = None, seed: int = 1) -> Net:
    return Net(spec, batch, seed)
