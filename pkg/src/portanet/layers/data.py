from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from .base import Layer, Params

SOURCES = ("mnist", "cifar10", "synthetic")


@dataclass(frozen=True)
class DataParams(Params):
    """Input geometry and where batches come from.

    ``batch_size``/``test_batch_size`` are defaults; the net builder can
    override the batch.
    """

    source: str = "synthetic"
    channels: int = 1
    height: int = 1
    width: int = 1
    classes: int = 10
    batch_size: int = 64
    test_batch_size: int = 100

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"data source must be one of {SOURCES}, got {self.source!r}")
        if min(self.channels, self.height, self.width, self.batch_size,
               self.test_batch_size) < 1 or self.classes < 2:
            raise ConfigError("data dimensions must be positive and classes >= 2")


class DataLayer(Layer):
    """Feeds a batch into its tops: images ``N x C x H x W`` and labels ``N``.

    The net copies each batch in; the layer itself computes nothing.
    """

    type_name = "data"
    params_class = DataParams
    n_bottom = (0, 0)
    n_top = (1, 2)

    def __init__(self, name, params=None):
        super().__init__(name, params)
        self.batch = self.params.batch_size

    def setup(self, bottom_shapes):
        p: DataParams = self.params
        return [(self.batch, p.channels, p.height, p.width), (self.batch,)]

    def forward(self, bottom, top):
        pass
