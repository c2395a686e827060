"""Text format for nets and solvers.

A file is a sequence of ``[section]`` headers, each followed by
``key = value`` lines. ``#`` starts a comment. A net file holds one
``[layer]`` section per layer, in execution order::

    [layer]
    name = conv1
    type = convolution
    bottom = data
    top = conv1
    num_output = 20
    kernel_size = 5

A solver file holds a single ``[solver]`` section. ``bottom`` and ``top``
take space- or comma-separated blob names. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .errors import ConfigError
from .layers.base import Params

_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")

PathLike = Union[str, Path]


def parse_sections(text: str, source: str = "<string>") -> list[tuple[str, dict[str, str]]]:
    sections: list[tuple[str, dict[str, str]]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            sections.append((m.group(1).lower(), {}))
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if not sections:
            raise ConfigError(f"{source}:{lineno}: key outside of any section")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        options = sections[-1][1]
        if key in options:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        options[key] = value
    return sections


def _names(value: str) -> tuple[str, ...]:
    return tuple(n for n in re.split(r"[\s,]+", value.strip()) if n)


@dataclass
class LayerSpec:
    name: str
    type: str
    bottoms: tuple[str, ...] = ()
    tops: tuple[str, ...] = ()
    options: dict[str, str] = field(default_factory=dict)


@dataclass
class NetSpec:
    name: str = "net"
    layers: list[LayerSpec] = field(default_factory=list)


def parse_net(text: str, source: str = "<string>") -> NetSpec:
    spec = NetSpec()
    for section, options in parse_sections(text, source):
        options = dict(options)
        if section == "net":
            spec.name = options.pop("name", spec.name)
            if options:
                raise ConfigError(f"{source}: unknown [net] keys {sorted(options)}")
            continue
        if section != "layer":
            raise ConfigError(f"{source}: unexpected section [{section}] in a net file")
        try:
            name = options.pop("name")
            kind = options.pop("type")
        except KeyError as exc:
            raise ConfigError(f"{source}: layer is missing {exc.args[0]!r}") from None
        spec.layers.append(LayerSpec(
            name=name,
            type=kind.lower(),
            bottoms=_names(options.pop("bottom", "")),
            tops=_names(options.pop("top", "")),
            options=options,
        ))
    if not spec.layers:
        raise ConfigError(f"{source}: no [layer] sections")
    return spec


def load_net(path: PathLike) -> NetSpec:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read net file {p}: {exc}") from exc
    return parse_net(text, str(p))


LR_POLICIES = ("fixed", "inv")


@dataclass(frozen=True)
class SolverSpec(Params):
    base_lr: float = 0.01
    lr_policy: str = "fixed"
    gamma: float = 0.0
    power: float = 0.0
    momentum: float = 0.0
    weight_decay: float = 0.0
    max_iter: int = 0
    test_interval: int = 0
    test_iter: int = 0
    snapshot_interval: int = 0
    display: int = 0
    seed: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.base_lr) and self.base_lr > 0):
            raise ConfigError("base_lr must be > 0")
        if self.lr_policy not in LR_POLICIES:
            raise ConfigError(f"lr_policy must be one of {LR_POLICIES}, got {self.lr_policy!r}")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        for name in ("max_iter", "test_interval", "test_iter", "snapshot_interval", "display"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def learning_rate(self, it: int) -> float:
        if self.lr_policy == "inv":
            return self.base_lr * (1.0 + self.gamma * it) ** (-self.power)
        return self.base_lr

    def replace(self, **changes) -> "SolverSpec":
        return dataclasses.replace(self, **changes)


def parse_solver(text: str, source: str = "<string>") -> SolverSpec:
    sections = parse_sections(text, source)
    if len(sections) != 1 or sections[0][0] != "solver":
        raise ConfigError(f"{source}: a solver file needs exactly one [solver] section")
    return SolverSpec.from_options(sections[0][1])


def load_solver(path: PathLike) -> SolverSpec:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read solver file {p}: {exc}") from exc
    return parse_solver(text, str(p))


def shipped_config(name: str) -> Path:
    """Path of a config file bundled with the package (e.g. ``mnist_lenet.cfg``)."""
    path = Path(__file__).with_name("configs") / name
    if not path.exists():
        raise ConfigError(f"no shipped config named {name!r}")
    return path


def find_config(name_or_path: PathLike) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    return shipped_config(str(name_or_path))
