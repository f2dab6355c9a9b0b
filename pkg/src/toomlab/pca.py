"""Discrete-state lattice engine: deterministic cellular automata plus noise.

Cells live on a 2D grid and take values in {-1, +1}. A rule maps the value
tuple read from a finite neighborhood to the new cell value; a noise model
independently overrides cells after the rule fires. Updates are synchronous
(double-buffered): every output cell is a function of the input grid only.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PERIODIC",
    "FIXED",
    "SpinConfig",
    "CARule",
    "NoiseModel",
    "PcaTrajectory",
    "DO_NOTHING",
    "FLIP",
    "TOOM",
    "PI_TOOM",
    "NEC",
    "apply_rule",
    "apply_noise",
    "pca_step",
    "run_pca",
    "magnetization",
    "negate",
    "config_to_text",
    "config_from_text",
    "config_to_bytes",
    "config_from_bytes",
]

PERIODIC = "periodic"
FIXED = "fixed"

#: North-East-Center neighborhood used by the Toom-family rules.
NEC = ((1, 0), (0, 1), (0, 0))

GRID_MAGIC = b"PCA1"


@dataclass
class SpinConfig:
    """A width x height grid of +-1 spins with a boundary-condition tag.

    ``cells[y, x]`` is the spin at column x, row y. Under ``FIXED`` boundaries
    reads outside the grid return ``fixed_value``; under ``PERIODIC`` they wrap.
    """

    cells: np.ndarray
    boundary: str = PERIODIC
    fixed_value: int = 1

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2:
            raise ValueError(f"cells must be 2D, got shape {cells.shape}")
        if not np.isin(cells, (-1, 1)).all():
            raise ValueError("cell values must all be -1 or +1")
        self.cells = cells.astype(np.int8)
        if self.boundary not in (PERIODIC, FIXED):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.fixed_value not in (-1, 1):
            raise ValueError("fixed_value must be -1 or +1")

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @classmethod
    def uniform(cls, width: int, height: int, value: int = 1, boundary: str = PERIODIC):
        if width < 1 or height < 1:
            raise ValueError("dimensions must be positive")
        return cls(np.full((height, width), value, dtype=np.int8), boundary)

    def copy(self) -> "SpinConfig":
        return SpinConfig(self.cells.copy(), self.boundary, self.fixed_value)

    def same_cells(self, other: "SpinConfig") -> bool:
        return self.cells.shape == other.cells.shape and bool(
            np.array_equal(self.cells, other.cells)
        )


@dataclass(frozen=True)
class CARule:
    """A deterministic transition rule over an ordered neighborhood.

    ``table`` holds the output for every value tuple: the entry at flat index
    ``sum(bit_i << (k-1-i))`` (bit_i = 1 when neighbor i reads +1) is the new
    cell value. The table must therefore be total over all 2^k inputs.
    """

    name: str
    neighborhood: tuple[tuple[int, int], ...]
    table: tuple[int, ...]

    def __post_init__(self):
        k = len(self.neighborhood)
        if len(self.table) != 2**k:
            raise ValueError(
                f"table must cover all {2**k} input tuples, got {len(self.table)}"
            )
        if any(v not in (-1, 1) for v in self.table):
            raise ValueError("table outputs must be -1 or +1")

    @classmethod
    def from_function(cls, name, neighborhood, fn) -> "CARule":
        """Tabulate ``fn(values) -> value`` over every neighborhood tuple."""
        neighborhood = tuple((int(dx), int(dy)) for dx, dy in neighborhood)
        k = len(neighborhood)
        table = []
        for bits in itertools.product((0, 1), repeat=k):
            values = tuple(2 * b - 1 for b in bits)
            table.append(int(fn(values)))
        return cls(name, neighborhood, tuple(table))

    def output(self, values) -> int:
        """Rule output for one explicit neighborhood value tuple."""
        idx = 0
        for v in values:
            idx = (idx << 1) | (v > 0)
        return self.table[idx]

    def table_array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.int8)


DO_NOTHING = CARule("do_nothing", ((0, 0),), (-1, 1))
FLIP = CARule("flip", ((0, 0),), (1, -1))
TOOM = CARule.from_function("toom", NEC, lambda v: 1 if sum(v) > 0 else -1)
PI_TOOM = CARule.from_function("pi_toom", NEC, lambda v: -1 if sum(v) > 0 else 1)

RULES = {r.name: r for r in (DO_NOTHING, FLIP, TOOM, PI_TOOM)}


@dataclass(frozen=True)
class NoiseModel:
    """Per-cell independent override noise applied after the rule.

    Each cell is independently forced to +1 with probability ``eps_plus`` and
    to -1 with probability ``eps_minus`` (one uniform draw per cell: values
    below eps_plus select +1, the next eps_minus band selects -1, the rest
    keep the rule output). An override that matches the rule output is not an
    error, so the error probability conditioned on any history is exactly
    eps_plus when the rule says -1 and eps_minus when it says +1.
    """

    eps_plus: float = 0.0
    eps_minus: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.eps_plus and 0.0 <= self.eps_minus):
            raise ValueError("override probabilities must be non-negative")
        if self.eps_plus + self.eps_minus > 1.0 + 1e-12:
            raise ValueError("override probabilities must sum to at most 1")

    @classmethod
    def symmetric(cls, rate: float) -> "NoiseModel":
        """Unbiased noise with per-cell error probability exactly ``rate``."""
        return cls(rate, rate)

    @property
    def is_zero(self) -> bool:
        return self.eps_plus == 0.0 and self.eps_minus == 0.0

    def error_probability(self, rule_output: int) -> float:
        """Probability that noise overrides a cell away from ``rule_output``."""
        return self.eps_minus if rule_output > 0 else self.eps_plus


ZERO_NOISE = NoiseModel()


@dataclass
class PcaTrajectory:
    """Time-ordered configurations with their per-step magnetizations."""

    configs: list
    magnetizations: np.ndarray

    def __post_init__(self):
        self.magnetizations = np.asarray(self.magnetizations, dtype=np.float64)
        if len(self.configs) != len(self.magnetizations):
            raise ValueError("configs and magnetizations lengths differ")

    @property
    def steps(self) -> int:
        return len(self.configs) - 1


def shifted_cells(config: SpinConfig, dx: int, dy: int) -> np.ndarray:
    """Grid whose (y, x) entry is the value read at (x + dx, y + dy)."""
    cells = config.cells
    if config.boundary == PERIODIC:
        return np.roll(cells, (-dy, -dx), axis=(0, 1))
    h, w = cells.shape
    out = np.full((h, w), config.fixed_value, dtype=cells.dtype)
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    src_ys = slice(max(0, dy), min(h, h + dy))
    src_xs = slice(max(0, dx), min(w, w + dx))
    out[ys, xs] = cells[src_ys, src_xs]
    return out


def apply_rule(config: SpinConfig, rule: CARule) -> SpinConfig:
    """One synchronous deterministic update of the whole grid."""
    if config.boundary == FIXED:
        for dx, dy in rule.neighborhood:
            if abs(dx) >= config.width or abs(dy) >= config.height:
                raise ValueError(
                    f"offset ({dx}, {dy}) of rule {rule.name!r} exceeds the "
                    f"{config.width}x{config.height} lattice under fixed boundaries"
                )
    k = len(rule.neighborhood)
    idx = np.zeros(config.cells.shape, dtype=np.intp)
    for dx, dy in rule.neighborhood:
        idx = (idx << 1) | (shifted_cells(config, dx, dy) > 0)
    out = rule.table_array()[idx]
    return SpinConfig(out, config.boundary, config.fixed_value)


def apply_noise(
    config: SpinConfig, noise: NoiseModel, rng: np.random.Generator
) -> SpinConfig:
    """Independently override cells according to the noise model."""
    if noise.is_zero:
        return config.copy()
    u = rng.random(config.cells.shape)
    out = np.where(
        u < noise.eps_plus,
        np.int8(1),
        np.where(u < noise.eps_plus + noise.eps_minus, np.int8(-1), config.cells),
    )
    return SpinConfig(out, config.boundary, config.fixed_value)


def pca_step(
    config: SpinConfig, rule: CARule, noise: NoiseModel, rng: np.random.Generator
) -> SpinConfig:
    """Rule first, then noise."""
    return apply_noise(apply_rule(config, rule), noise, rng)


def run_pca(
    initial: SpinConfig,
    rule: CARule,
    noise: NoiseModel,
    steps: int,
    rng: np.random.Generator,
) -> PcaTrajectory:
    """Evolve for ``steps`` updates, recording every configuration."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    configs = [initial.copy()]
    mags = [magnetization(initial)]
    current = configs[0]
    for _ in range(steps):
        current = pca_step(current, rule, noise, rng)
        configs.append(current)
        mags.append(magnetization(current))
    return PcaTrajectory(configs, np.array(mags))


def magnetization(config: SpinConfig) -> float:
    """Mean spin, in [-1, 1]."""
    return float(config.cells.mean())


def negate(config: SpinConfig) -> SpinConfig:
    return SpinConfig(-config.cells, config.boundary, -config.fixed_value)


# ---------------------------------------------------------------------------
# Serialization: plain-text grid and compact binary bitfield.
# ---------------------------------------------------------------------------


def config_to_text(config: SpinConfig) -> str:
    """One row per line, '+' for +1 and '-' for -1, row y = 0 first."""
    rows = ["".join("+" if v > 0 else "-" for v in row) for row in config.cells]
    return "\n".join(rows) + "\n"


def config_from_text(
    text: str, boundary: str = PERIODIC, fixed_value: int = 1
) -> SpinConfig:
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty grid text")
    width = len(rows[0])
    cells = np.empty((len(rows), width), dtype=np.int8)
    for y, line in enumerate(rows):
        if len(line) != width:
            raise ValueError(f"row {y} has length {len(line)}, expected {width}")
        for x, ch in enumerate(line):
            if ch == "+":
                cells[y, x] = 1
            elif ch == "-":
                cells[y, x] = -1
            else:
                raise ValueError(f"unexpected character {ch!r} at row {y}")
    return SpinConfig(cells, boundary, fixed_value)


def config_to_bytes(config: SpinConfig, step: int = 0) -> bytes:
    """16-byte header (magic, width, height, step; little-endian u32) plus a
    row-major bitfield with bit 1 = +1."""
    header = struct.pack(
        "<4sIII", GRID_MAGIC, config.width, config.height, int(step)
    )
    bits = (config.cells.reshape(-1) > 0).astype(np.uint8)
    return header + np.packbits(bits).tobytes()


def config_from_bytes(
    blob: bytes, boundary: str = PERIODIC, fixed_value: int = 1
) -> tuple[SpinConfig, int]:
    if len(blob) < 16:
        raise ValueError("truncated grid blob")
    magic, width, height, step = struct.unpack("<4sIII", blob[:16])
    if magic != GRID_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    n = width * height
    payload = np.frombuffer(blob[16:], dtype=np.uint8)
    if payload.size < (n + 7) // 8:
        raise ValueError("bitfield shorter than width*height")
    bits = np.unpackbits(payload)[:n]
    cells = np.where(bits > 0, 1, -1).astype(np.int8).reshape(height, width)
    return SpinConfig(cells, boundary, fixed_value), step
