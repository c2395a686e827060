"""Layer base class, parameter records and weight fillers."""

from __future__ import annotations

import dataclasses
import math
from typing import Any, ClassVar, Mapping, Sequence

import numpy as np

from ..blob import Blob
from ..errors import ConfigError, ShapeError


def parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


_CONVERTERS = {int: int, float: float, bool: parse_bool, str: str,
               "int": int, "float": float, "bool": parse_bool, "str": str}


class Params:
    """Mixin for parameter dataclasses: build from ``key = value`` strings.

    Subclasses may declare ``aliases``, mapping a shorthand key to the fields
    it sets (``kernel_size`` sets both ``kernel_h`` and ``kernel_w``).
    """

    aliases: ClassVar[Mapping[str, tuple[str, ...]]] = {}

    @classmethod
    def from_options(cls, options: Mapping[str, str]):
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values: dict[str, Any] = {}
        for key, raw in options.items():
            targets = cls.aliases.get(key, (key,))
            for name in targets:
                if name not in fields:
                    raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
                convert = _CONVERTERS.get(fields[name].type)
                if convert is None:
                    raise ConfigError(f"field {name!r} of {cls.__name__} is not configurable")
                try:
                    values[name] = convert(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(f"{cls.__name__}: {exc}") from exc


def out_dim(size: int, kernel: int, stride: int, pad: int) -> int:
    """Floor-mode sliding window output extent."""
    return (size + 2 * pad - kernel) // stride + 1


def check_window(kernel_h, kernel_w, stride_h, stride_w, pad_h, pad_w) -> None:
    if min(kernel_h, kernel_w, stride_h, stride_w) < 1:
        raise ShapeError("kernel and stride must be >= 1")
    if min(pad_h, pad_w) < 0:
        raise ShapeError("padding must be >= 0")


def xavier_fill(blob: Blob, rng: np.random.Generator) -> None:
    """Uniform in [-sqrt(3/fan_in), sqrt(3/fan_in)], fan_in = count / num_output."""
    fan_in = blob.count() // blob.shape[0]
    limit = math.sqrt(3.0 / fan_in)
    blob.data.array[...] = rng.uniform(-limit, limit, size=blob.shape).astype(np.float32)


class Layer:
    """Executor over named blobs.

    ``setup`` receives bottom shapes and returns top shapes; it allocates
    learnable blobs (``self.blobs``) and any private scratch. ``forward`` and
    ``backward`` then run on the blobs the net hands them.
    """

    type_name: ClassVar[str] = ""
    params_class: ClassVar[type | None] = None
    n_bottom: ClassVar[tuple[int, int]] = (1, 1)
    n_top: ClassVar[tuple[int, int]] = (1, 1)
    is_loss: ClassVar[bool] = False

    def __init__(self, name: str, params=None):
        self.name = name
        if params is None and self.params_class is not None:
            params = self.params_class()
        self.params = params
        self.blobs: list[Blob] = []

    @classmethod
    def from_options(cls, name: str, options: Mapping[str, str]) -> "Layer":
        if cls.params_class is None:
            if options:
                raise ConfigError(f"layer {name!r} of type {cls.type_name!r} takes no options, "
                                  f"got {sorted(options)}")
            return cls(name)
        return cls(name, cls.params_class.from_options(options))

    def setup(self, bottom_shapes: Sequence[tuple[int, ...]]) -> list[tuple[int, ...]]:
        raise NotImplementedError

    def init_params(self, rng: np.random.Generator) -> None:
        """Fill learnable blobs; default is a no-op for parameter-free layers."""

    def forward(self, bottom: Sequence[Blob], top: Sequence[Blob]) -> None:
        raise NotImplementedError

    def backward(self, top: Sequence[Blob], propagate_down: Sequence[bool],
                 bottom: Sequence[Blob]) -> None:
        """Default: nothing to propagate."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"
