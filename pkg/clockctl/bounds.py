"""Time-energy inequalities for the controlled system, as margins.

Every check reports a margin (satisfied side minus required side), so a
check passes when its margin is at least -tol. Checks that only hold inside
the window t ≤ πħ/(2ΔH_c) are marked not applicable outside it.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import fft, linalg

from .model import ClockWaveFunction, condition1_residual
from .propagator import (
    autocorrelation,
    clock_fidelity_to,
    free_clock_evolve,
    reduced_states,
)
from .statelib import (
    HermitianOperator,
    PureState,
    expectation,
    fidelity,
    positive_part_projector,
    purity,
    random_pure_state,
    support_projector,
    trace_distance,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-6
MANDELSTAM_TAMM_TOLERANCE = 1e-9
SUPPORT_EPSILON = 1e-8
FULL_DEVIATION_THRESHOLD = 1e-3
RANDOM_VECTORS = 100
DEVIATION_FLOOR = 1e-6
MIXEDNESS_FLOOR = 1e-8

# Per-sample checks, in CSV column order.
CHECKS = (
    "fidelity",
    "corollary",
    "trace",
    "weak_trace",
    "vector",
    "mandelstam_tamm",
    "support",
    "pure_to_mixed",
)


@dataclass(frozen=True)
class SupportReport:
    t: float
    rank_free: int
    rank_perturbed: int
    inclusion_defect: float
    epsilon: float

    @property
    def cap(self):
        return float(np.sqrt(self.epsilon))

    @property
    def margin(self):
        return self.cap - self.inclusion_defect

    @property
    def passed(self):
        return self.inclusion_defect <= self.cap


@dataclass
class BoundReport:
    t: float
    F: float
    D: float
    delta_hc: float
    bound_fidelity: float
    bound_trace: float
    applicable: bool
    margins: Dict[str, Optional[float]] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self):
        """Pass flag per check; None where the check does not apply."""
        return {
            name: None if margin is None else margin >= -self.tolerances.get(name, 0.0)
            for name, margin in self.margins.items()
        }


def in_window(t, delta_hc, hbar=1.0):
    """0 ≤ t ≤ πħ/(2ΔH_c)."""
    if t < 0:
        return False
    return delta_hc == 0 or t <= np.pi * hbar / (2.0 * delta_hc)


def _angle(t, delta_hc, hbar):
    return delta_hc * t / hbar


def fidelity_bound_check(t, delta_hc, F, hbar=1.0):
    """F − cos(ΔH_c t/ħ); None outside the window."""
    if not in_window(t, delta_hc, hbar):
        return None
    return F - np.cos(_angle(t, delta_hc, hbar))


def corollary_check(t, delta_hc, F, hbar=1.0):
    """t·ΔH_c − (πħ/2)(1 − F)."""
    if not in_window(t, delta_hc, hbar):
        return None
    return t * delta_hc - 0.5 * np.pi * hbar * (1.0 - F)


def trace_bound_check(t, delta_hc, D, hbar=1.0):
    """(1 − D/2) − cos²(ΔH_c t/ħ)."""
    if not in_window(t, delta_hc, hbar):
        return None
    return (1.0 - D / 2.0) - np.cos(_angle(t, delta_hc, hbar)) ** 2


def weak_trace_bound_check(t, delta_hc, D, hbar=1.0):
    """(1 − D²/4) − cos²(ΔH_c t/ħ), the form implied by D ≤ 2√(1 − F²)."""
    if not in_window(t, delta_hc, hbar):
        return None
    return (1.0 - D**2 / 4.0) - np.cos(_angle(t, delta_hc, hbar)) ** 2


def vector_family(rho_free, rho_pert, rng, count=RANDOM_VECTORS):
    """Eigenbasis of ρ_s⁰ − ρ_s followed by ``count`` seeded random states."""
    difference = HermitianOperator(rho_free.entries - rho_pert.entries)
    _, vectors = difference.eigh()
    family = [PureState.normalized(vectors[:, index]) for index in range(vectors.shape[1])]
    family.extend(random_pure_state(rho_free.dim, rng) for _ in range(count))
    return family


def vector_inequality_check(xi, rho_free, rho_pert, t, delta_hc, hbar=1.0):
    """⟨ξ|ρ_s|ξ⟩ − cos²(ΔH_c t/ħ)·⟨ξ|ρ_s⁰|ξ⟩."""
    if not in_window(t, delta_hc, hbar):
        return None
    weight = np.cos(_angle(t, delta_hc, hbar)) ** 2
    return expectation(rho_pert, xi) - weight * expectation(rho_free, xi)


def positive_part_weight(rho_free, rho_pert):
    """tr((ρ_s⁰ − ρ_s)E⁺), equal to D/2."""
    difference = HermitianOperator(rho_free.entries - rho_pert.entries)
    projector = positive_part_projector(difference)
    return float(np.trace(difference.entries @ projector.entries).real)


def mandelstam_tamm_check(phi0, delta_hc, t_samples, hbar=1.0):
    """|(φ_c(t), φ_c(0))| − cos(ΔH_c t/ħ) for each sample inside the window."""
    margins = []
    for t in t_samples:
        if in_window(t, delta_hc, hbar):
            margins.append(autocorrelation(phi0, t) - np.cos(_angle(t, delta_hc, hbar)))
        else:
            margins.append(None)
    return margins


def support_inclusion_check(rho_free, rho_pert, epsilon=SUPPORT_EPSILON, t=0.0):
    """‖(1 − P_pert)·P_free‖ for the support projectors at threshold ε."""
    free = support_projector(rho_free, epsilon).entries
    perturbed = support_projector(rho_pert, epsilon).entries
    leak = (np.eye(rho_free.dim) - perturbed) @ free
    return SupportReport(
        t=t,
        rank_free=int(round(np.trace(free).real)),
        rank_perturbed=int(round(np.trace(perturbed).real)),
        inclusion_defect=float(linalg.norm(leak, 2)),
        epsilon=epsilon,
    )


def minimal_full_deviation_time(reports, threshold=FULL_DEVIATION_THRESHOLD):
    """First sampled t with F ≤ threshold, or None."""
    for report in reports:
        if report.F <= threshold:
            return report.t
    return None


def full_deviation_contract(t_star, delta_hc, hbar=1.0, slack=1e-4):
    """t*·ΔH_c − (πħ/2 − slack·ΔH_c); non-negative when the contract holds."""
    return t_star * delta_hc - (0.5 * np.pi * hbar - slack * delta_hc)


def back_action_report(state, phi_free):
    """(clock purity, fidelity of the clock to the freely evolved clock)."""
    return reduced_states(state).clock_purity, clock_fidelity_to(state, phi_free)


def truncated_clock(phi, d_trunc):
    """Projection onto the d_trunc lowest-|k| momentum modes, renormalized."""
    grid = phi.grid
    if d_trunc >= grid.n:
        return phi
    order = np.argsort(np.abs(grid.wavenumbers), kind="stable")
    spectrum = fft.fft(phi.amplitudes)
    truncated = np.zeros_like(spectrum)
    truncated[order[:d_trunc]] = spectrum[order[:d_trunc]]
    amplitudes = fft.ifft(truncated)
    amplitudes /= np.sqrt(grid.spacing * np.vdot(amplitudes, amplitudes).real)
    return ClockWaveFunction(grid, amplitudes)


def truncated_clock_residual(d_trunc, config, t_samples, omega):
    """max over t ≤ 0 of ‖V(φ_trunc(t) ⊗ Ω)‖ for a band-limited clock."""
    phi = truncated_clock(config.packet, d_trunc)
    residual = 0.0
    for t in t_samples:
        if t > 0:
            continue
        evolved = free_clock_evolve(phi, t)
        residual = max(
            residual,
            condition1_residual(evolved, omega, config.coupling, config.coupling_operator),
        )
    logger.debug("Truncation to %s modes: Condition 1 residual %.3e", d_trunc, residual)
    return residual


def evaluate_sample(
    t,
    rho_free,
    rho_pert,
    delta_hc,
    hbar=1.0,
    *,
    rng,
    autocorr=None,
    tolerance=DEFAULT_TOLERANCE,
    propagation_error=0.0,
    mt_tolerance=MANDELSTAM_TAMM_TOLERANCE,
    epsilon=SUPPORT_EPSILON,
    random_vectors=RANDOM_VECTORS,
):
    """All per-sample checks for one pair (ρ_s⁰(t), ρ_s(t))."""
    F = fidelity(rho_pert, rho_free)
    D = trace_distance(rho_pert, rho_free)
    angle = _angle(t, delta_hc, hbar)
    applicable = in_window(t, delta_hc, hbar)
    report = BoundReport(
        t=float(t),
        F=F,
        D=D,
        delta_hc=delta_hc,
        bound_fidelity=float(np.cos(angle)),
        bound_trace=float(1.0 - np.cos(angle) ** 2),
        applicable=applicable,
    )
    slack = tolerance + propagation_error
    margins = dict.fromkeys(CHECKS)
    tolerances = dict.fromkeys(CHECKS, slack)
    tolerances["mandelstam_tamm"] = mt_tolerance
    tolerances["support"] = 0.0
    tolerances["pure_to_mixed"] = 0.0

    if applicable:
        margins["fidelity"] = fidelity_bound_check(t, delta_hc, F, hbar)
        margins["corollary"] = corollary_check(t, delta_hc, F, hbar)
        margins["trace"] = trace_bound_check(t, delta_hc, D, hbar)
        margins["weak_trace"] = weak_trace_bound_check(t, delta_hc, D, hbar)
        margins["vector"] = min(
            vector_inequality_check(xi, rho_free, rho_pert, t, delta_hc, hbar)
            for xi in vector_family(rho_free, rho_pert, rng, random_vectors)
        )
        if autocorr is not None:
            margins["mandelstam_tamm"] = autocorr - np.cos(angle)
        margins["support"] = support_inclusion_check(rho_free, rho_pert, epsilon, t).margin
        if F < 1.0 - DEVIATION_FLOOR and rho_free.is_pure():
            margins["pure_to_mixed"] = (1.0 - MIXEDNESS_FLOOR) - purity(rho_pert)

    report.margins = {name: None if value is None else float(value) for name, value in margins.items()}
    report.tolerances = tolerances
    return report
