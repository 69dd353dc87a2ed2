"""Time evolution of the clock, the system and the coupled pair.

The composite state is stored as an (n, d_s) array Θ[j, a]: clock grid point
j, system basis state a. H_c = p is applied exactly in Fourier space. The
coupled evolution uses Strang splitting with the interaction as the outer
half steps,

    e^{-iV dt/2ħ} (e^{-ip dt/ħ} ⊗ e^{-iH_s dt/ħ}) e^{-iV dt/2ħ},

where each interaction half step is exact: V is diagonal in grid point and
in the eigenbasis of B.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from scipy import fft, linalg

from .model import ClockWaveFunction, momentum_matrix
from .statelib import DensityMatrix, purity, von_neumann_entropy

logger = logging.getLogger(__name__)

NORM_TOL = 1e-9
DENSE_LIMIT = 512
CLOCK_MATRIX_LIMIT = 512


def _fft_workers():
    return getattr(settings, "CLOCKCTL_FFT_WORKERS", 1)


@dataclass(frozen=True, eq=False)
class CompositeState:
    """Pure clock ⊗ system state, normalized with the grid measure."""

    grid: object
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex)
        if amplitudes.ndim != 2 or amplitudes.shape[0] != self.grid.n:
            raise ValidationError(
                "Composite amplitudes must have shape (n, d_s).", code="shape"
            )
        norm = composite_norm(self.grid, amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(
                "Composite state is not normalized (norm %(norm)s).",
                code="not_normalized",
                params={"norm": norm},
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def system_dim(self):
        return self.amplitudes.shape[1]

    def norm(self):
        return composite_norm(self.grid, self.amplitudes)


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    state: CompositeState
    t: float
    dt_used: float
    step_halving_error: Optional[float] = None


class ReducedStates(NamedTuple):
    system: DensityMatrix
    clock: Optional[DensityMatrix]
    clock_purity: float
    clock_entropy: float


def composite_norm(grid, amplitudes):
    return float(np.sqrt(grid.spacing * np.vdot(amplitudes, amplitudes).real))


def l2_distance(first, second):
    """Grid L² distance between two composite (or clock) states."""
    difference = np.asarray(first.amplitudes) - np.asarray(second.amplitudes)
    return composite_norm(first.grid, difference)


def product_state(phi, omega):
    """φ ⊗ Ω."""
    return CompositeState(phi.grid, np.outer(phi.amplitudes, omega.amplitudes))


def coupling_norm(state, config):
    """‖VΘ‖ for V = g(x) ⊗ B."""
    g = config.coupling.values
    applied = state.amplitudes @ config.coupling_operator.entries.T
    weights = np.sum(np.abs(applied) ** 2, axis=1)
    return float(np.sqrt(state.grid.spacing * np.sum(g**2 * weights)))


def _translate(amplitudes, grid, t):
    spectrum = fft.fft(amplitudes, axis=0, workers=_fft_workers())
    phase = np.exp(-1j * grid.wavenumbers * t)
    if amplitudes.ndim == 2:
        phase = phase[:, None]
    return fft.ifft(spectrum * phase, axis=0, workers=_fft_workers())


def free_clock_evolve(phi, t):
    """φ(x - t): exact translation by the Fourier shift theorem.

    A known compact support moves with the packet. Interpolation ringing
    outside the translated support is cleared and the packet renormalized.
    """
    if t == 0:
        return phi
    grid = phi.grid
    amplitudes = _translate(phi.amplitudes, grid, t)
    support = None
    if phi.support is not None:
        low, high = phi.support[0] + t, phi.support[1] + t
        if low < grid.x_min or high > grid.x_max:
            raise ValidationError(
                "Translating by t=%(t)s moves the packet across the periodic boundary.",
                code="wrap",
                params={"t": t},
            )
        x = grid.positions
        amplitudes[(x <= low) | (x >= high)] = 0.0
        amplitudes /= np.sqrt(grid.spacing * np.vdot(amplitudes, amplitudes).real)
        support = (low, high)
    return ClockWaveFunction(grid, amplitudes, support)


def free_system_evolve(rho, hamiltonian, t, hbar=1.0):
    """e^{-iH_s t/ħ} ρ e^{iH_s t/ħ} via the eigendecomposition of H_s."""
    if t == 0 or hamiltonian.is_zero():
        return rho
    unitary = _spectral_unitary(hamiltonian, t, hbar)
    return DensityMatrix.from_unnormalized(unitary @ rho.entries @ unitary.conj().T)


def _spectral_unitary(hamiltonian, t, hbar):
    values, vectors = hamiltonian.eigh()
    return (vectors * np.exp(-1j * values * t / hbar)) @ vectors.conj().T


class StrangPropagator:
    """Strang stepper for one model configuration and step size."""

    def __init__(self, config, dt):
        if dt <= 0:
            raise ValidationError("Time step must be positive.", code="step")
        self.config = config
        self.dt = dt
        self.grid = config.grid
        self.hbar = config.hbar
        coupling = config.coupling
        self._active = coupling.active
        self._g_active = coupling.values[self._active]
        self._b_values, self._b_vectors = config.coupling_operator.eigh()
        self._system_free = config.system_hamiltonian.is_zero()
        self._factors = self._step_factors(dt)

    def _step_factors(self, step):
        kinetic = np.exp(-1j * self.grid.wavenumbers * step)[:, None]
        system = None
        if not self._system_free:
            system = _spectral_unitary(self.config.system_hamiltonian, step, self.hbar).T
        interaction = np.exp(
            -0.5j * step / self.hbar * np.outer(self._g_active, self._b_values)
        )
        return kinetic, system, interaction

    def _half_interaction(self, amplitudes, interaction):
        if self._active.size == 0:
            return amplitudes
        rows = amplitudes[self._active]
        in_eigenbasis = rows @ self._b_vectors.conj()
        amplitudes[self._active] = (in_eigenbasis * interaction) @ self._b_vectors.T
        return amplitudes

    def _step(self, amplitudes, factors):
        kinetic, system, interaction = factors
        amplitudes = self._half_interaction(amplitudes, interaction)
        spectrum = fft.fft(amplitudes, axis=0, workers=_fft_workers())
        amplitudes = fft.ifft(spectrum * kinetic, axis=0, workers=_fft_workers())
        if system is not None:
            amplitudes = amplitudes @ system
        return self._half_interaction(amplitudes, interaction)

    def advance(self, amplitudes, duration):
        """Evolve raw (n, d_s) amplitudes by ``duration`` (may be negative).

        Full steps of size dt, then one partial step for the remainder.
        """
        amplitudes = np.array(amplitudes, dtype=complex)
        direction = 1.0 if duration >= 0 else -1.0
        remaining = abs(duration)
        full_steps = int(np.floor(remaining / self.dt + 1e-9))
        remainder = remaining - full_steps * self.dt
        factors = self._factors if direction > 0 else self._step_factors(-self.dt)
        for _ in range(full_steps):
            amplitudes = self._step(amplitudes, factors)
        if remainder > 1e-12 * self.dt:
            amplitudes = self._step(amplitudes, self._step_factors(direction * remainder))
        return amplitudes


def strang_evolve(start, config, t, dt, estimate_error=True):
    """Evolve a composite state to time t with Strang splitting.

    With ``estimate_error`` the run is repeated at dt/2 and the L² distance
    between the two end states is reported.
    """
    if t < 0:
        raise ValidationError("Evolution time must be non-negative.", code="step")
    if dt <= 0 or (t > 0 and dt > t):
        raise ValidationError(
            "Time step dt=%(dt)s must lie in (0, t=%(t)s].", code="step", params={"dt": dt, "t": t}
        )
    amplitudes = StrangPropagator(config, dt).advance(start.amplitudes, t)
    state = CompositeState(start.grid, amplitudes)
    error = None
    if estimate_error:
        finer = StrangPropagator(config, dt / 2).advance(start.amplitudes, t)
        error = composite_norm(start.grid, amplitudes - finer)
    logger.debug(
        "Strang run to t=%s with dt=%s: norm drift %.3e, halving error %s",
        t, dt, abs(state.norm() - 1.0), error,
    )
    return EvolutionResult(state, float(t), float(dt), error)


def dense_hamiltonian(config):
    """Full (n·d_s)² matrix P⊗I + I⊗H_s + diag(g)⊗B."""
    n, dim = config.grid.n, config.system_dim
    if n * dim > DENSE_LIMIT:
        raise ValidationError(
            "Dense propagation needs n·d_s ≤ %(limit)s, got %(size)s.",
            code="too_large",
            params={"limit": DENSE_LIMIT, "size": n * dim},
        )
    momentum = momentum_matrix(config.grid, config.hbar)
    hamiltonian = (
        np.kron(momentum, np.eye(dim))
        + np.kron(np.eye(n), config.system_hamiltonian.entries)
        + np.kron(np.diag(config.coupling.values), config.coupling_operator.entries)
    )
    return 0.5 * (hamiltonian + hamiltonian.conj().T)


def dense_oracle_evolve(start, config, t):
    """Brute-force e^{-iHt/ħ}Θ by diagonalizing the full Hamiltonian."""
    if t == 0:
        return start
    values, vectors = linalg.eigh(dense_hamiltonian(config))
    flat = start.amplitudes.reshape(-1)
    evolved = vectors @ (np.exp(-1j * values * t / config.hbar) * (vectors.conj().T @ flat))
    return CompositeState(start.grid, evolved.reshape(start.amplitudes.shape))


def autocorrelation(phi0, t):
    """|(φ_c(t), φ_c(0))| under free clock evolution."""
    return float(abs(free_clock_evolve(phi0, t).inner(phi0)))


def reduced_states(state):
    """Partial traces of a pure composite state.

    The clock density matrix is formed only for n ≤ 512; its purity and
    entropy always come from the d_s × d_s Gram matrix of the conditional
    clock vectors, which has the same non-zero spectrum.
    """
    grid = state.grid
    amplitudes = state.amplitudes
    gram = grid.spacing * (amplitudes.T @ amplitudes.conj())
    system = DensityMatrix.from_unnormalized(gram)
    # Gram matrix of conditional clock vectors is the transpose of ρ_s.
    clock_spectrum = DensityMatrix.from_unnormalized(gram.T)
    clock = None
    if grid.n <= CLOCK_MATRIX_LIMIT:
        clock = DensityMatrix.from_unnormalized(grid.spacing * (amplitudes @ amplitudes.conj().T))
    return ReducedStates(
        system=system,
        clock=clock,
        clock_purity=purity(clock_spectrum),
        clock_entropy=von_neumann_entropy(clock_spectrum),
    )


def clock_fidelity_to(state, phi):
    """Fidelity of the reduced clock state to |φ⟩⟨φ|: √⟨φ|ρ_c|φ⟩."""
    grid = state.grid
    overlaps = grid.spacing * (phi.amplitudes.conj() @ state.amplitudes)
    value = np.sum(np.abs(overlaps) ** 2) / state.norm() ** 2
    return float(np.sqrt(min(value, 1.0)))
