"""Driven-oscillator lattice whose Floquet cycle enacts cellular-automaton steps.

Every CA cell is promoted to an A/B oscillator pair. One drive period
(tau = 4, four unit-length sub-steps) runs: relax both sublattices in the
pinning wells; hold A and pull each B toward the smoothed rule target read
from its A neighborhood; relax; hold B and pull A likewise with the second
rule. Decoding the sign of the freshly written sublattice after the following
relaxation recovers the discrete trajectory; at zero bath temperature it
reproduces the deterministic CA exactly, at finite temperature the bath
converts the machine into a probabilistic CA.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .pca import CARule, PI_TOOM, SpinConfig, TOOM
from .streams import derive_stream

__all__ = [
    "TAU",
    "IntegrationDivergedError",
    "FloquetParams",
    "OscillatorLattice",
    "DiscreteRead",
    "StrobeRow",
    "LangevinTrajectory",
    "encode_q",
    "decode_s",
    "decode_grid",
    "pin_potential",
    "interaction_target",
    "interaction_gradient",
    "interaction_potential",
    "multilinear_coefficients",
    "langevin_step",
    "pin_forces",
    "run_floquet_cycle",
    "run_floquet",
    "lattice_to_bytes",
    "lattice_from_bytes",
]

#: Floquet period in time units; four unit-length sub-steps.
TAU = 4.0

LATTICE_MAGIC = b"OSC1"


class IntegrationDivergedError(RuntimeError):
    """Raised when a position or momentum exceeds the divergence guard."""

    def __init__(self, time: float, guard: float):
        super().__init__(
            f"integration diverged near t = {time:g} (|q| or |p| beyond {guard:g})"
        )
        self.time = time


@dataclass(frozen=True)
class FloquetParams:
    """Physical and numerical parameters of the driven Langevin dynamics.

    ``v`` sets both wells via v_pin = v and v_I = v/4. Frictions follow the
    per-sub-step prescription gamma = kappa_f * 2 sqrt(v_I) while a rule drives
    one sublattice and gamma_r = kappa_f * 4 sqrt(2 v_pin) while both relax,
    so kappa_f = 1 is the critically damped reference point. The symmetry
    breaking field F acts wherever the pinning well is active. ``pin_ramp``
    optionally ramps the pinning prefactor linearly from zero over that
    fraction of each relaxation sub-step instead of switching instantly.
    """

    v: float = 50.0
    F: float = 1e-4
    temperature: float = 0.0
    kappa_f: float = 1.0
    dt: float = 1e-3
    step2_rule: CARule = field(default=TOOM)
    step4_rule: CARule = field(default=PI_TOOM)
    pin_ramp: float = 1.0
    guard: float = 1e6

    def __post_init__(self):
        if self.v <= 0:
            raise ValueError("v must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.kappa_f <= 0:
            raise ValueError("kappa_f must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.pin_ramp <= 1.0:
            raise ValueError("pin_ramp must lie in [0, 1]")
        n = round(1.0 / self.dt)
        if n < 1 or abs(n * self.dt - 1.0) > 1e-9:
            raise ValueError(
                f"dt = {self.dt} must divide each unit-length sub-step exactly"
            )
        if self.guard <= 0:
            raise ValueError("guard must be positive")

    @property
    def v_pin(self) -> float:
        return self.v

    @property
    def v_i(self) -> float:
        return self.v / 4.0

    @property
    def gamma_interaction(self) -> float:
        return self.kappa_f * 2.0 * math.sqrt(self.v_i)

    @property
    def gamma_relax(self) -> float:
        return self.kappa_f * 4.0 * math.sqrt(2.0 * self.v_pin)

    @property
    def steps_per_unit(self) -> int:
        return round(1.0 / self.dt)


@dataclass
class OscillatorLattice:
    """Positions and momenta of the A and B oscillator sublattices."""

    qA: np.ndarray
    pA: np.ndarray
    qB: np.ndarray
    pB: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        grids = []
        for name in ("qA", "pA", "qB", "pB"):
            g = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if g.ndim != 2:
                raise ValueError(f"{name} must be 2D")
            grids.append(g)
            setattr(self, name, g)
        if len({g.shape for g in grids}) != 1:
            raise ValueError("all four grids must share dimensions")
        if not all(np.isfinite(g).all() for g in grids):
            raise ValueError("lattice entries must be finite")
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    @property
    def width(self) -> int:
        return self.qA.shape[1]

    @property
    def height(self) -> int:
        return self.qA.shape[0]

    @classmethod
    def from_spins(cls, config: SpinConfig, mass: float = 1.0) -> "OscillatorLattice":
        """Both sublattices at the encoded spin positions, at rest."""
        q = encode_grid(config)
        zeros = np.zeros_like(q)
        return cls(q.copy(), zeros.copy(), q.copy(), zeros.copy(), mass)

    def copy(self) -> "OscillatorLattice":
        return OscillatorLattice(
            self.qA.copy(), self.pA.copy(), self.qB.copy(), self.pB.copy(), self.mass
        )

    def decode_a(self) -> SpinConfig:
        return decode_grid(self.qA)

    def decode_b(self) -> SpinConfig:
        return decode_grid(self.qB)


def encode_q(s: int) -> float:
    """Spin state to oscillator position."""
    if s not in (-1, 1):
        raise ValueError("spin state must be -1 or +1")
    return float(s)


def encode_grid(config: SpinConfig) -> np.ndarray:
    return config.cells.astype(np.float64)


def decode_s(q: float) -> int:
    """Nearest encoded state; the q = 0 tie resolves to +1."""
    if not math.isfinite(q):
        raise ValueError(f"cannot decode non-finite position {q!r}")
    return 1 if q >= 0.0 else -1


def decode_grid(q: np.ndarray) -> SpinConfig:
    if not np.isfinite(q).all():
        raise ValueError("cannot decode non-finite positions")
    return SpinConfig(np.where(q >= 0.0, 1, -1).astype(np.int8))


def pin_potential(q, params: FloquetParams):
    """Energy and force of V_pin(q) = v_pin (q^2 - 1)^2 + F q.

    Accepts scalars or arrays; force is the exact -dV/dq.
    """
    q = np.asarray(q, dtype=np.float64)
    energy = params.v_pin * (q * q - 1.0) ** 2 + params.F * q
    force = -4.0 * params.v_pin * q * (q * q - 1.0) - params.F
    if energy.ndim == 0:
        return float(energy), float(force)
    return energy, force


def _corner_weight(u: float, bit: int) -> float:
    return 0.5 * (1.0 + u) if bit else 0.5 * (1.0 - u)


def _clamp(u: float) -> float:
    return -1.0 if u < -1.0 else (1.0 if u > 1.0 else u)


def interaction_target(neighbor_positions, rule: CARule) -> float:
    """Smoothed rule output: multilinear interpolation of the corner table.

    Each coordinate is clamped to [-1, 1] first; at exact corners this equals
    the encoded CA output.
    """
    k = len(rule.neighborhood)
    if len(neighbor_positions) != k:
        raise ValueError(
            f"rule {rule.name!r} expects {k} neighbor positions, "
            f"got {len(neighbor_positions)}"
        )
    u = [_clamp(float(x)) for x in neighbor_positions]
    target = 0.0
    for c in range(2**k):
        weight = 1.0
        for j in range(k):
            weight *= _corner_weight(u[j], (c >> (k - 1 - j)) & 1)
        values = tuple(1 if (c >> (k - 1 - j)) & 1 else -1 for j in range(k))
        target += rule.output(values) * weight
    return target


def interaction_gradient(neighbor_positions, rule: CARule) -> np.ndarray:
    """d(target)/d(neighbor); zero for coordinates clamped outside [-1, 1]."""
    k = len(rule.neighborhood)
    raw = [float(x) for x in neighbor_positions]
    u = [_clamp(x) for x in raw]
    grad = np.zeros(k)
    for c in range(2**k):
        values = tuple(1 if (c >> (k - 1 - j)) & 1 else -1 for j in range(k))
        out = rule.output(values)
        for j in range(k):
            if abs(raw[j]) > 1.0:
                continue
            g = 0.5 if (c >> (k - 1 - j)) & 1 else -0.5
            for l in range(k):
                if l != j:
                    g *= _corner_weight(u[l], (c >> (k - 1 - l)) & 1)
            grad[j] += out * g
    return grad


def interaction_potential(q_b: float, neighbor_positions, params: FloquetParams,
                          rule: CARule):
    """Energy (v_I/2)(target - q_b)^2 with exact forces on every argument."""
    target = interaction_target(neighbor_positions, rule)
    d = target - float(q_b)
    energy = 0.5 * params.v_i * d * d
    force_on_b = params.v_i * d
    forces_on_neighbors = -params.v_i * d * interaction_gradient(
        neighbor_positions, rule
    )
    return energy, force_on_b, forces_on_neighbors


def multilinear_coefficients(rule: CARule) -> np.ndarray:
    """Polynomial coefficients of the multilinear target, one per subset mask.

    Mask bit j corresponds to neighbor j; coef[mask] multiplies the monomial
    prod_{j in mask} u_j. Used by the compiled integrator.
    """
    k = len(rule.neighborhood)
    coef = np.zeros(2**k)
    for mask in range(2**k):
        total = 0.0
        for c in range(2**k):
            values = tuple(1 if (c >> j) & 1 else -1 for j in range(k))
            prod = 1.0
            for j in range(k):
                if (mask >> j) & 1:
                    prod *= values[j]
            total += rule.output(values) * prod
        coef[mask] = total / 2**k
    return coef


def langevin_step(lattice: OscillatorLattice, forces, gamma: float,
                  temperature: float, dt: float,
                  rng: np.random.Generator) -> OscillatorLattice:
    """One explicit Euler step of the Langevin equations for both sublattices.

    ``forces(lattice) -> (fA, fB)`` supplies the potential forces. Updates read
    the pre-step state only: q += (p/m) dt and p += (f - gamma p) dt + xi with
    the momentum kick xi drawn per oscillator from N(0, 2 gamma m T dt), the
    variance that makes friction -gamma p equilibrate to exp(-H/T).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    fA, fB = forces(lattice)
    m = lattice.mass
    qA = lattice.qA + (lattice.pA / m) * dt
    qB = lattice.qB + (lattice.pB / m) * dt
    pA = lattice.pA + (fA - gamma * lattice.pA) * dt
    pB = lattice.pB + (fB - gamma * lattice.pB) * dt
    if temperature > 0 and gamma > 0:
        amp = math.sqrt(2.0 * gamma * m * temperature * dt)
        pA = pA + amp * rng.standard_normal(pA.shape)
        pB = pB + amp * rng.standard_normal(pB.shape)
    out = OscillatorLattice(qA, pA, qB, pB, m)
    guard = 1e6
    for g in (out.qA, out.pA, out.qB, out.pB):
        if not (np.abs(g) < guard).all():
            raise IntegrationDivergedError(float("nan"), guard)
    return out


def pin_forces(params: FloquetParams):
    """Force context for relaxation sub-steps (pinning wells on both grids)."""

    def forces(lattice: OscillatorLattice):
        _, fA = pin_potential(lattice.qA, params)
        _, fB = pin_potential(lattice.qB, params)
        return fA, fB

    return forces


# ---------------------------------------------------------------------------
# Floquet drive
# ---------------------------------------------------------------------------

#: sub-step kinds within one cycle, in execution order
_SUBSTEPS = ("relax", "drive_b", "relax", "drive_a")


@dataclass
class DiscreteRead:
    """Decoded sublattices at the end of a relaxation sub-step."""

    time: float
    cycle: int
    sub_step: int
    a: SpinConfig
    b: SpinConfig


@dataclass
class StrobeRow:
    cycle: int
    sub_step: int
    time: float
    m_a: float
    m_b: float


@dataclass
class LangevinTrajectory:
    params: FloquetParams
    cycles: int
    reads: list
    strobe: list
    snapshots: list
    trace: tuple | None = None

    def read_times(self) -> np.ndarray:
        return np.array([r.time for r in self.reads])


def _sign_mean(q: np.ndarray) -> float:
    return float(np.where(q >= 0.0, 1.0, -1.0).mean())


class _Engine:
    """Owns the mutable lattice state and the per-run noise buffers."""

    def __init__(self, lattice: OscillatorLattice, params: FloquetParams,
                 rng: np.random.Generator, trace_site=None):
        self.lat = lattice
        self.params = params
        # bulk momentum kicks come from a fast generator seeded once from the
        # caller's stream, so trajectories stay reproducible and independent
        self.rng = np.random.Generator(
            np.random.SFC64(np.random.SeedSequence(rng.integers(2**63, size=4)))
        )
        self.time = 0.0
        n = params.steps_per_unit
        h, w = lattice.qA.shape
        self._noise = (np.empty((n, h, w)), np.empty((n, h, w)))
        self._no_noise = np.empty((0, 1, 1))
        self._coef = {
            "drive_b": multilinear_coefficients(params.step2_rule),
            "drive_a": multilinear_coefficients(params.step4_rule),
        }
        self._offs = {
            "drive_b": _index_tables(params.step2_rule, h, w),
            "drive_a": _index_tables(params.step4_rule, h, w),
        }
        if trace_site is not None:
            self.trace_x, self.trace_y = int(trace_site[0]), int(trace_site[1])
            if not (0 <= self.trace_x < w and 0 <= self.trace_y < h):
                raise ValueError(f"trace site {trace_site} outside lattice")
            self.traces = []
        else:
            self.trace_x = self.trace_y = 0
            self.traces = None
        self._trace_buf = (
            np.empty((n, 2)) if trace_site is not None else np.empty((0, 2))
        )

    def _noise_arrays(self, gamma: float):
        p = self.params
        if p.temperature <= 0 or gamma <= 0:
            return self._no_noise, self._no_noise, 0.0
        amp = math.sqrt(2.0 * gamma * self.lat.mass * p.temperature * p.dt)
        self.rng.standard_normal(out=self._noise[0])
        self.rng.standard_normal(out=self._noise[1])
        return self._noise[0], self._noise[1], amp

    def substep(self, kind: str):
        p = self.params
        lat = self.lat
        do_trace = self.traces is not None
        if kind == "relax":
            gamma = p.gamma_relax
            na, nb, amp = self._noise_arrays(gamma)
            ramp_steps = round(p.pin_ramp * p.steps_per_unit)
            status = _kernels.pin_substep(
                lat.qA, lat.pA, lat.qB, lat.pB, p.v_pin, p.F, gamma,
                lat.mass, p.dt, p.steps_per_unit, ramp_steps, na, nb, amp,
                self._trace_buf, do_trace, self.trace_y, self.trace_x, p.guard,
            )
            if do_trace:
                self.traces.append(self._trace_buf.copy())
        else:
            gamma = p.gamma_interaction
            n_mem, n_drv, amp = self._noise_arrays(gamma)
            xn, yn = self._offs[kind]
            coef = self._coef[kind]
            if kind == "drive_b":
                args = (lat.qA, lat.pA, lat.qB, lat.pB)
            else:
                args = (lat.qB, lat.pB, lat.qA, lat.pA)
            status = _kernels.interact_substep(
                *args, xn, yn, coef, p.v_pin, p.F, p.v_i, gamma,
                lat.mass, p.dt, p.steps_per_unit, n_mem, n_drv, amp,
                self._trace_buf, do_trace, self.trace_y, self.trace_x, p.guard,
            )
            if do_trace:
                rec = self._trace_buf.copy()
                if kind == "drive_a":
                    rec = rec[:, ::-1].copy()   # trace columns are (mem, drv)
                self.traces.append(rec)
        self.time += 1.0
        if status != 0:
            raise IntegrationDivergedError(self.time, p.guard)

    def read(self, cycle: int, sub_step: int) -> DiscreteRead:
        return DiscreteRead(
            self.time, cycle, sub_step, self.lat.decode_a(), self.lat.decode_b()
        )

    def strobe_row(self, cycle: int, sub_step: int) -> StrobeRow:
        return StrobeRow(
            cycle, sub_step, self.time, _sign_mean(self.lat.qA),
            _sign_mean(self.lat.qB),
        )


def _index_tables(rule: CARule, h: int, w: int):
    """Wrapped neighbor index tables: xn[j, x] = (x + dx_j) mod w, likewise yn."""
    k = len(rule.neighborhood)
    xn = np.empty((k, w), dtype=np.int64)
    yn = np.empty((k, h), dtype=np.int64)
    for j, (dx, dy) in enumerate(rule.neighborhood):
        xn[j] = (np.arange(w) + dx) % w
        yn[j] = (np.arange(h) + dy) % h
    return xn, yn


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return derive_stream(int(rng))


def run_floquet_cycle(lattice: OscillatorLattice, params: FloquetParams, rng,
                      *, trailing_relaxation: bool = True):
    """Advance one Floquet period from the given lattice state.

    Returns ``(lattice, reads)`` with decoded reads of both sublattices at the
    end of every relaxation sub-step. With ``trailing_relaxation`` an extra
    relaxation unit follows the final drive so the A-sublattice write also
    gets its pinned read (this is how consecutive cycles see it anyway).
    """
    engine = _Engine(lattice.copy(), params, _as_generator(rng))
    reads = []
    for sub, kind in enumerate(_SUBSTEPS):
        engine.substep(kind)
        if kind == "relax":
            reads.append(engine.read(0, sub))
    if trailing_relaxation:
        engine.substep("relax")
        reads.append(engine.read(1, 0))
    return engine.lat, reads


def run_floquet(initial: SpinConfig, params: FloquetParams, cycles: int, rng,
                *, mass: float = 1.0, snapshot_every: int | None = None,
                trace_site=None) -> LangevinTrajectory:
    """Drive an encoded spin configuration for ``cycles`` Floquet periods.

    Oscillators start at (q, p) = (encoded spin, 0) on both sublattices. One
    trailing relaxation unit follows the last cycle so that the final A write
    is read back from a pinned state like every other step. The trajectory
    records decoded reads at every relaxation end, per-sub-step sign
    magnetizations, optional lattice snapshots every ``snapshot_every`` cycles,
    and an optional dense (q_A, q_B) trace at one site.
    """
    if cycles < 0:
        raise ValueError("cycles must be non-negative")
    rng = _as_generator(rng)
    lattice = OscillatorLattice.from_spins(initial, mass)
    engine = _Engine(lattice, params, rng, trace_site=trace_site)
    reads = [engine.read(0, -1)]
    strobe = []
    snapshots = []
    if snapshot_every:
        snapshots.append((0.0, engine.lat.copy()))
    for cycle in range(cycles):
        for sub, kind in enumerate(_SUBSTEPS):
            engine.substep(kind)
            strobe.append(engine.strobe_row(cycle, sub))
            if kind == "relax":
                reads.append(engine.read(cycle, sub))
        if snapshot_every and (cycle + 1) % snapshot_every == 0:
            snapshots.append((engine.time, engine.lat.copy()))
    if cycles > 0:
        engine.substep("relax")
        strobe.append(engine.strobe_row(cycles, 0))
        reads.append(engine.read(cycles, 0))
    trace = None
    if trace_site is not None:
        dense = np.concatenate(engine.traces, axis=0)
        times = params.dt * np.arange(1, dense.shape[0] + 1)
        trace = (times, dense[:, 0].copy(), dense[:, 1].copy())
    return LangevinTrajectory(params, cycles, reads, strobe, snapshots, trace)


# ---------------------------------------------------------------------------
# Binary lattice dumps
# ---------------------------------------------------------------------------


def lattice_to_bytes(lattice: OscillatorLattice) -> bytes:
    """Magic, width, height (little-endian u32), then qA, pA, qB, pB grids
    as row-major little-endian float64."""
    header = struct.pack("<4sII", LATTICE_MAGIC, lattice.width, lattice.height)
    body = b"".join(
        np.ascontiguousarray(g, dtype="<f8").tobytes()
        for g in (lattice.qA, lattice.pA, lattice.qB, lattice.pB)
    )
    return header + body


def lattice_from_bytes(blob: bytes, mass: float = 1.0) -> OscillatorLattice:
    if len(blob) < 12:
        raise ValueError("truncated lattice blob")
    magic, width, height = struct.unpack("<4sII", blob[:12])
    if magic != LATTICE_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    n = width * height
    expected = 12 + 4 * 8 * n
    if len(blob) != expected:
        raise ValueError(f"lattice blob has {len(blob)} bytes, expected {expected}")
    grids = []
    for i in range(4):
        start = 12 + i * 8 * n
        flat = np.frombuffer(blob[start:start + 8 * n], dtype="<f8")
        grids.append(flat.reshape(height, width).astype(np.float64))
    return OscillatorLattice(*grids, mass)
