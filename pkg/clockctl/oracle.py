"""Closed-form evolution for H_s = 0 and a diagonal coupling operator B.

Each eigenvalue s of B defines a branch in which the clock obeys
iħ∂ψ = (p + s·g(x))ψ. For a packet that starts left of the coupling region
the solution is the free translate times a position-dependent phase,

    ψ_s(t, x) = exp(σ·i·s·G(x)/ħ) φ_c(t, x),   G(x) = ∫_0^x g,

with the branch sign σ fixed once against the dense propagator
(BRANCH_PHASE_SIGN) and re-derivable with calibrate_branch_sign().
"""

import logging
from dataclasses import dataclass

import numpy as np
from django.core.exceptions import ValidationError
from scipy import fft, integrate

from .model import ClockWaveFunction, ModelConfig, build_grid, system_operator
from .propagator import (
    CompositeState,
    dense_oracle_evolve,
    free_clock_evolve,
    l2_distance,
    product_state,
)
from .statelib import DensityMatrix, PureState

logger = logging.getLogger(__name__)

# exp(-i s G/ħ) on the branch where B has eigenvalue s.
BRANCH_PHASE_SIGN = -1

COEFFICIENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BranchPhase:
    """Phase profile σ·s·G(x) of one branch."""

    grid: object
    cumulative: np.ndarray
    sign: float

    def factors(self, hbar=1.0):
        return np.exp(1j * BRANCH_PHASE_SIGN * self.sign * self.cumulative / hbar)


def cumulative_coupling(profile, method="spectral"):
    """G(x) = ∫_0^x g on the grid.

    ``spectral`` integrates the Fourier series of g; ``trapezoid`` is the
    cumulative trapezoidal rule. Both are clamped to exactly 0 for x ≤ 0 and
    exactly profile.integral for x ≥ Δ.
    """
    grid = profile.grid
    x = grid.positions
    total = profile.integral
    if method == "trapezoid":
        values = integrate.cumulative_trapezoid(profile.values, dx=grid.spacing, initial=0.0)
    elif method == "spectral":
        k = grid.wavenumbers
        spectrum = fft.fft(profile.values)
        antiderivative = np.zeros_like(spectrum)
        oscillating = k != 0
        oscillating[grid.n // 2] = False
        antiderivative[oscillating] = spectrum[oscillating] / (1j * k[oscillating])
        values = fft.ifft(antiderivative).real + total * (x - grid.x_min) / grid.length
    else:
        raise ValidationError(
            "Unknown integration method %(method)s.", code="method", params={"method": method}
        )

    before = x <= 0
    values = values - values[before][-1]
    values[before] = 0.0
    values[x >= profile.width] = total
    values.setflags(write=False)
    return values


def analytic_branch_state(phi_free, cumulative, sign, hbar=1.0):
    """Branch clock state e^{σ i s G/ħ}·φ_free."""
    phase = BranchPhase(phi_free.grid, cumulative, sign)
    return ClockWaveFunction(
        phi_free.grid, phase.factors(hbar) * phi_free.amplitudes, phi_free.support
    )


def overlap_kernel(phi_free, cumulative, hbar=1.0):
    """(φ¹_c(t), φ⁰_c(t)) = h·Σ e^{2σiG/ħ}|φ_free|²."""
    weights = np.abs(phi_free.amplitudes) ** 2
    phases = np.exp(2j * BRANCH_PHASE_SIGN * cumulative / hbar)
    return complex(phi_free.grid.spacing * np.sum(phases * weights))


def analytic_reduced_state(c0, c1, overlap):
    """ρ_s(t) for the qubit branches with amplitudes c0, c1."""
    if abs(abs(c0) ** 2 + abs(c1) ** 2 - 1.0) > COEFFICIENT_TOL:
        raise ValidationError(
            "Coefficients are not normalized: |c0|²+|c1|² = %(total)s.",
            code="not_normalized",
            params={"total": abs(c0) ** 2 + abs(c1) ** 2},
        )
    coherence = c0 * np.conj(c1) * overlap
    return DensityMatrix(
        np.array(
            [[abs(c0) ** 2, coherence], [np.conj(coherence), abs(c1) ** 2]],
            dtype=complex,
        )
    )


def _check_supported(config):
    if not config.system_hamiltonian.is_zero() or not config.coupling_operator.is_diagonal():
        raise ValidationError(
            "The closed form needs H_s = 0 and a diagonal coupling operator.",
            code="oracle_unsupported",
        )


def supports_closed_form(config):
    return config.system_hamiltonian.is_zero() and config.coupling_operator.is_diagonal()


def analytic_composite_state(config, omega, t, method="spectral"):
    """Closed-form Θ(t) for the start φ_c(0) ⊗ Ω, any t with the packet left
    of the coupling region at t = 0."""
    _check_supported(config)
    phi_free = free_clock_evolve(config.packet, t)
    cumulative = cumulative_coupling(config.coupling, method)
    eigenvalues = np.diag(config.coupling_operator.entries).real
    columns = [
        coefficient * analytic_branch_state(phi_free, cumulative, s, config.hbar).amplitudes
        for coefficient, s in zip(omega.amplitudes, eigenvalues)
    ]
    return CompositeState(config.grid, np.stack(columns, axis=1))


def calibrate_branch_sign(t=None):
    """Compare both sign choices with the dense propagator on a small grid and
    return the one that matches.

    The grid spacing is 1/32 so the reference time is a whole number of
    grid steps.
    """
    grid = build_grid(-2.0, 6.0, 256)
    config = ModelConfig(
        grid=grid,
        delta=1.0,
        k0=0.0,
        coupling_width=1.0,
        g_integral=np.pi / 4,
        system_hamiltonian=system_operator("zero"),
        coupling_operator=system_operator("sigma_z"),
    )
    if t is None:
        t = config.delta + config.coupling_width
    omega = PureState(np.array([1.0, 1.0]) / np.sqrt(2.0))
    reference = dense_oracle_evolve(product_state(config.packet, omega), config, t)
    phi_free = free_clock_evolve(config.packet, t)
    cumulative = cumulative_coupling(config.coupling)

    distances = {}
    for candidate in (1, -1):
        columns = [
            c * np.exp(1j * candidate * s * cumulative / config.hbar) * phi_free.amplitudes
            for c, s in zip(omega.amplitudes, (1.0, -1.0))
        ]
        trial = CompositeState(grid, np.stack(columns, axis=1))
        distances[candidate] = l2_distance(trial, reference)
    sign = min(distances, key=distances.get)
    logger.info("Branch sign calibration: distances %s, chosen %+d", distances, sign)
    return sign
