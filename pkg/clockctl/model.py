"""The discretized clock-plus-qubit world.

A momentum clock (H_c = p) lives on a periodic grid, starts strictly
localized in (-δ, 0) and drifts to the right at unit speed. It couples to
the system through V = g(x) ⊗ B, where g vanishes outside (0, Δ).
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from django.core.exceptions import ValidationError
from scipy import fft, integrate, linalg

from .statelib import HermitianOperator

logger = logging.getLogger(__name__)

NORM_TOL = 1e-10

SYSTEM_OPERATORS = {
    "zero": [[0, 0], [0, 0]],
    "identity": [[1, 0], [0, 1]],
    "sigma_x": [[0, 1], [1, 0]],
    "sigma_y": [[0, -1j], [1j, 0]],
    "sigma_z": [[1, 0], [0, -1]],
}

COUPLING_SHAPES = ("bump", "sine-squared")


def _bump(u):
    """exp(-1/(1 - u²)) on |u| < 1, exactly zero elsewhere."""
    values = np.zeros_like(u, dtype=float)
    inside = np.abs(u) < 1.0
    values[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return values


@dataclass(frozen=True)
class Grid:
    """Periodic grid of n points on [x_min, x_max)."""

    x_min: float
    x_max: float
    n: int

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def spacing(self):
        return self.length / self.n

    @cached_property
    def positions(self):
        positions = self.x_min + self.spacing * np.arange(self.n)
        positions.setflags(write=False)
        return positions

    @cached_property
    def wavenumbers(self):
        wavenumbers = 2.0 * np.pi * fft.fftfreq(self.n, d=self.spacing)
        wavenumbers.setflags(write=False)
        return wavenumbers


@dataclass(frozen=True, eq=False)
class ClockWaveFunction:
    """Clock amplitudes with h·Σ|ψ|² = 1.

    ``support`` is the open interval outside which the amplitudes vanish
    exactly, when known.
    """

    grid: Grid
    amplitudes: np.ndarray
    support: tuple = None

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex)
        if amplitudes.shape != (self.grid.n,):
            raise ValidationError(
                "Clock amplitudes must have one entry per grid point.", code="shape"
            )
        norm = np.sqrt(self.grid.spacing * np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(
                "Clock wave function is not normalized (norm %(norm)s).",
                code="not_normalized",
                params={"norm": norm},
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    def inner(self, other):
        """(self, other) = h·Σ conj(self)·other."""
        return self.grid.spacing * np.vdot(self.amplitudes, other.amplitudes)


@dataclass(frozen=True, eq=False)
class CouplingProfile:
    """g(x_j), vanishing outside (0, Δ)."""

    grid: Grid
    values: np.ndarray
    width: float
    shape: str = "bump"

    @property
    def integral(self):
        return float(integrate.trapezoid(self.values, dx=self.grid.spacing))

    @property
    def degenerate(self):
        return not np.any(self.values)

    @cached_property
    def active(self):
        """Grid indices where g is non-zero."""
        return np.flatnonzero(self.values)


@dataclass(frozen=True, eq=False)
class ModelConfig:
    grid: Grid
    delta: float
    k0: float
    coupling_width: float
    g_integral: float
    system_hamiltonian: HermitianOperator
    coupling_operator: HermitianOperator
    hbar: float = 1.0
    coupling_shape: str = "bump"

    def __post_init__(self):
        if self.delta <= 0:
            raise ValidationError("Packet width δ must be positive.", code="packet")
        if self.delta >= abs(self.grid.x_min):
            raise ValidationError(
                "Packet width δ=%(delta)s does not fit left of 0 in a box starting at %(x_min)s.",
                code="packet",
                params={"delta": self.delta, "x_min": self.grid.x_min},
            )
        if not np.isfinite(self.g_integral):
            raise ValidationError("Coupling integral must be finite.", code="coupling")
        if self.hbar <= 0:
            raise ValidationError("ħ must be positive.", code="hbar")
        if self.system_hamiltonian.dim != self.coupling_operator.dim:
            raise ValidationError(
                "H_s and B act on spaces of different dimension (%(a)s vs %(b)s).",
                code="dimension_mismatch",
                params={
                    "a": self.system_hamiltonian.dim,
                    "b": self.coupling_operator.dim,
                },
            )

    @property
    def system_dim(self):
        return self.system_hamiltonian.dim

    @cached_property
    def packet(self):
        return bump_packet(self.grid, self.delta, self.k0)

    @cached_property
    def coupling(self):
        return coupling_profile(
            self.grid, self.coupling_width, self.g_integral, self.coupling_shape
        )

    @cached_property
    def energy(self):
        return clock_energy_stats(self.packet, self.hbar)

    @property
    def delta_hc(self):
        return self.energy.spread

    @property
    def window_end(self):
        """πħ/(2ΔH_c); infinite for a momentum eigenstate."""
        if self.delta_hc == 0:
            return np.inf
        return np.pi * self.hbar / (2.0 * self.delta_hc)


@dataclass(frozen=True)
class ClockEnergy:
    mean: float
    spread: float


def system_operator(name_or_matrix):
    """Named qubit operator or an explicit Hermitian matrix."""
    if isinstance(name_or_matrix, str):
        try:
            return HermitianOperator(np.array(SYSTEM_OPERATORS[name_or_matrix], dtype=complex))
        except KeyError:
            raise ValidationError(
                "Unknown operator %(name)s; choose one of %(choices)s.",
                code="operator",
                params={"name": name_or_matrix, "choices": ", ".join(SYSTEM_OPERATORS)},
            ) from None
    return HermitianOperator(np.asarray(name_or_matrix, dtype=complex))


def build_grid(x_min, x_max, n):
    if n < 2 or n & (n - 1):
        raise ValidationError(
            "Grid size %(n)s is not a power of two (≥ 2).", code="grid", params={"n": n}
        )
    if not x_min < 0 < x_max:
        raise ValidationError(
            "The box (%(x_min)s, %(x_max)s) must contain 0 in its interior.",
            code="grid",
            params={"x_min": x_min, "x_max": x_max},
        )
    return Grid(float(x_min), float(x_max), int(n))


def bump_packet(grid, delta, k0=0.0):
    """Bump on (-δ, 0) with carrier e^{i k0 x}, normalized on the grid."""
    if delta <= 0 or delta >= abs(grid.x_min):
        raise ValidationError(
            "Packet width δ=%(delta)s is too large for the box.",
            code="packet",
            params={"delta": delta},
        )
    x = grid.positions
    envelope = _bump((2.0 * x + delta) / delta)
    if not np.any(envelope):
        raise ValidationError(
            "Packet width δ=%(delta)s covers no grid point.", code="packet", params={"delta": delta}
        )
    amplitudes = envelope * np.exp(1j * k0 * x)
    amplitudes /= np.sqrt(grid.spacing * np.sum(envelope**2))
    return ClockWaveFunction(grid, amplitudes, support=(-delta, 0.0))


def coupling_profile(grid, width, g_integral_target, shape="bump"):
    """g on (0, Δ) scaled so that its trapezoidal integral equals the target."""
    if width >= grid.x_max:
        raise ValidationError(
            "Coupling width Δ=%(width)s does not fit in the box.",
            code="coupling",
            params={"width": width},
        )
    if width < 2 * grid.spacing:
        raise ValidationError(
            "Coupling width Δ=%(width)s is below two grid spacings; g would be empty.",
            code="coupling",
            params={"width": width},
        )
    x = grid.positions
    if shape == "bump":
        raw = _bump((2.0 * x - width) / width)
    elif shape == "sine-squared":
        raw = np.where((x > 0) & (x < width), np.sin(np.pi * x / width) ** 2, 0.0)
    else:
        raise ValidationError(
            "Unknown coupling shape %(shape)s.", code="coupling", params={"shape": shape}
        )

    if g_integral_target == 0:
        logger.warning("Coupling integral is zero: V vanishes identically")
        values = np.zeros(grid.n)
    else:
        values = raw * (g_integral_target / integrate.trapezoid(raw, dx=grid.spacing))
    values.setflags(write=False)
    return CouplingProfile(grid, values, float(width), shape)


def clock_energy_stats(phi, hbar=1.0):
    """Mean and spread ΔH_c of H_c = p, from the discrete momentum spectrum."""
    weights = np.abs(fft.fft(phi.amplitudes)) ** 2
    weights /= weights.sum()
    k = phi.grid.wavenumbers
    mean_k = np.dot(weights, k)
    variance = np.dot(weights, (k - mean_k) ** 2)
    return ClockEnergy(mean=float(hbar * mean_k), spread=float(hbar * np.sqrt(variance)))


def momentum_matrix(grid, hbar=1.0):
    """Dense spectral momentum operator F† diag(ħk) F."""
    dft = linalg.dft(grid.n, scale="sqrtn")
    return dft.conj().T @ (hbar * grid.wavenumbers[:, None] * dft)


def condition1_residual(phi, omega, profile, operator):
    """‖V(φ⊗Ω)‖ = ‖BΩ‖·√(h Σ g²|φ|²)."""
    system_part = linalg.norm(operator.entries @ omega.amplitudes)
    clock_part = np.sqrt(profile.grid.spacing * np.sum(profile.values**2 * np.abs(phi.amplitudes) ** 2))
    return float(system_part * clock_part)


def condition2_strength(config, t_probe, dt=1e-2):
    """max over basis states Ω of ‖V e^{-iHt/ħ}(φ_c(0)⊗Ω)‖ at t_probe."""
    from .propagator import coupling_norm, product_state, strang_evolve
    from .statelib import PureState

    if t_probe <= 0:
        raise ValidationError("Probe time must be positive.", code="step")
    strength = 0.0
    for index in range(config.system_dim):
        start = product_state(config.packet, PureState.basis(config.system_dim, index))
        result = strang_evolve(start, config, t_probe, min(dt, t_probe), estimate_error=False)
        strength = max(strength, coupling_norm(result.state, config))
    return strength


def condition2_witness(config, t_probe, dt=1e-2, threshold=1e-8):
    """True when the interaction is not trivial along the evolution."""
    return condition2_strength(config, t_probe, dt) > threshold


def validate_no_wrap(config, t_max, t_min=0.0, margin=None):
    """Reject runs whose packet would cross the periodic boundary.

    Forward runs need t_max + Δ + margin ≤ x_max (inclusive); runs that start
    before 0 need -δ + t_min - margin ≥ x_min.
    """
    grid = config.grid
    if margin is None:
        margin = 2 * grid.spacing
    slack = 1e-12 * grid.length
    minimal_x_max = t_max + config.coupling_width + margin
    if minimal_x_max > grid.x_max + slack:
        logger.info("Rejected t_max=%s: needs x_max ≥ %s", t_max, minimal_x_max)
        raise ValidationError(
            "t_max=%(t_max)s wraps the packet around the box; x_max must be at least "
            "%(minimal_x_max)s.",
            code="wrap",
            params={"t_max": t_max, "minimal_x_max": minimal_x_max, "x_max": grid.x_max},
        )
    maximal_x_min = -config.delta + t_min - margin
    if maximal_x_min < grid.x_min - slack:
        raise ValidationError(
            "t_min=%(t_min)s wraps the packet around the left edge; x_min must be at most "
            "%(maximal_x_min)s.",
            code="wrap",
            params={"t_min": t_min, "maximal_x_min": maximal_x_min, "x_min": grid.x_min},
        )
