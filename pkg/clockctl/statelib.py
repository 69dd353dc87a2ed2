"""Finite-dimensional state algebra for the controlled system.

Density matrices, pure states and Hermitian operators are small immutable
value objects around numpy arrays. Every spectral quantity is computed from
a Hermitian eigendecomposition (``scipy.linalg.eigh``).

The trace distance uses the unnormalized convention tr|ρ0 − ρ1|, so it
ranges over [0, 2].
"""

from dataclasses import dataclass

import numpy as np
from django.core.exceptions import ValidationError
from scipy import linalg
from scipy.stats import unitary_group

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-12
NORM_TOL = 1e-12
ENTROPY_CUTOFF = 1e-14
# Relative to the largest eigenvalue; below it an eigenvalue is roundoff.
RANK_CUTOFF = 1e-14


def _frozen(array):
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


def _check_square(entries, name):
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 1:
        raise ValidationError(
            "%(name)s must be a non-empty square matrix, got shape %(shape)s.",
            code="shape",
            params={"name": name, "shape": entries.shape},
        )


def _check_hermitian(entries, name):
    defect = np.max(np.abs(entries - entries.conj().T))
    if defect > HERMITIAN_TOL:
        raise ValidationError(
            "%(name)s is not Hermitian (max |A - A^dagger| = %(defect)s).",
            code="not_hermitian",
            params={"name": name, "defect": defect},
        )


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian matrix on the system space (H_s, B, projectors)."""

    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries)
        _check_square(entries, "operator")
        _check_hermitian(entries, "operator")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self):
        return self.entries.shape[0]

    def eigh(self):
        return linalg.eigh(self.entries)

    def is_zero(self):
        return not np.any(self.entries)

    def is_diagonal(self):
        return not np.any(self.entries - np.diag(np.diag(self.entries)))


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector of the system space."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = _frozen(self.amplitudes)
        if amplitudes.ndim != 1 or amplitudes.size < 1:
            raise ValidationError(
                "A pure state needs a non-empty vector of amplitudes.", code="shape"
            )
        norm = linalg.norm(amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(
                "State vector is not normalized (norm %(norm)s).",
                code="not_normalized",
                params={"norm": norm},
            )
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dim(self):
        return self.amplitudes.size

    @classmethod
    def normalized(cls, amplitudes):
        """Build a state from any non-zero vector by normalizing it first."""
        amplitudes = np.asarray(amplitudes, dtype=complex)
        norm = linalg.norm(amplitudes)
        if norm == 0:
            raise ValidationError("The zero vector is not a state.", code="not_normalized")
        return cls(amplitudes / norm)

    @classmethod
    def basis(cls, dim, index):
        amplitudes = np.zeros(dim, dtype=complex)
        amplitudes[index] = 1.0
        return cls(amplitudes)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries)
        _check_square(entries, "density matrix")
        _check_hermitian(entries, "density matrix")
        trace = np.trace(entries).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValidationError(
                "Density matrix trace is %(trace)s, expected 1.",
                code="trace",
                params={"trace": trace},
            )
        smallest = linalg.eigvalsh(entries)[0]
        if smallest < -PSD_TOL:
            raise ValidationError(
                "Density matrix has negative eigenvalue %(value)s.",
                code="not_psd",
                params={"value": smallest},
            )
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self):
        return self.entries.shape[0]

    @classmethod
    def from_unnormalized(cls, entries):
        """Symmetrize and rescale to unit trace (for partial traces of
        numerically evolved states)."""
        entries = np.asarray(entries, dtype=complex)
        entries = 0.5 * (entries + entries.conj().T)
        return cls(entries / np.trace(entries).real)

    def eigh(self):
        return linalg.eigh(self.entries)

    def is_pure(self, tol=1e-12):
        return purity(self) > 1.0 - tol


def _check_same_dim(rho0, rho1):
    if rho0.dim != rho1.dim:
        raise ValidationError(
            "States act on spaces of different dimension (%(a)s vs %(b)s).",
            code="dimension_mismatch",
            params={"a": rho0.dim, "b": rho1.dim},
        )


def _clipped(values, relative_floor=0.0):
    """Clip eigenvalues drifting below zero by at most PSD_TOL.

    With ``relative_floor`` set, eigenvalues under relative_floor·max are
    zeroed as well, so roundoff in a rank-deficient matrix leaves no
    square-root residue.
    """
    if values[0] < -PSD_TOL:
        raise ValidationError(
            "Matrix is not positive semidefinite (eigenvalue %(value)s).",
            code="not_psd",
            params={"value": values[0]},
        )
    values = np.clip(values, 0.0, None)
    if relative_floor:
        values[values < relative_floor * values[-1]] = 0.0
    return values


def _psd_sqrt(entries):
    values, vectors = linalg.eigh(entries)
    roots = np.sqrt(_clipped(values, RANK_CUTOFF))
    return (vectors * roots) @ vectors.conj().T


def density_from_pure(psi):
    """|ψ⟩⟨ψ| for a normalized state."""
    amplitudes = psi.amplitudes
    return DensityMatrix(np.outer(amplitudes, amplitudes.conj()))


def _pure_vector(rho):
    """The state vector of ρ if ρ has numerical rank one, else None."""
    values, vectors = rho.eigh()
    if rho.dim > 1 and values[-2] > RANK_CUTOFF * values[-1]:
        return None
    return vectors[:, -1]


def fidelity(rho0, rho1):
    """F(ρ0, ρ1) = tr √(√ρ0 ρ1 √ρ0), in [0, 1] (not squared).

    When either state is pure this reduces to √⟨ψ|ρ|ψ⟩, which is used
    directly so both argument orders agree to roundoff.
    """
    _check_same_dim(rho0, rho1)
    for pure, other in ((rho0, rho1), (rho1, rho0)):
        psi = _pure_vector(pure)
        if psi is not None:
            overlap = np.vdot(psi, other.entries @ psi).real
            return float(min(np.sqrt(max(overlap, 0.0)), 1.0))
    root = _psd_sqrt(rho0.entries)
    inner = root @ rho1.entries @ root
    inner = 0.5 * (inner + inner.conj().T)
    values = _clipped(linalg.eigvalsh(inner), RANK_CUTOFF)
    return float(min(np.sum(np.sqrt(values)), 1.0))


def trace_distance(rho0, rho1):
    """D(ρ0, ρ1) = tr|ρ0 − ρ1|, in [0, 2]."""
    _check_same_dim(rho0, rho1)
    values = linalg.eigvalsh(rho0.entries - rho1.entries)
    return float(np.sum(np.abs(values)))


def fuchs_van_de_graaf_check(rho0, rho1, tol=1e-9):
    """D ≤ 2√(1 − F²)."""
    fid = fidelity(rho0, rho1)
    return trace_distance(rho0, rho1) <= 2.0 * np.sqrt(max(0.0, 1.0 - fid**2)) + tol


def positive_part_projector(operator):
    """Projector onto the eigenspaces of A with eigenvalue λ ≥ 0.

    The zero eigenspace is included, so A = 0 gives the identity.
    """
    values, vectors = operator.eigh()
    kept = vectors[:, values >= 0.0]
    return HermitianOperator(kept @ kept.conj().T)


def support_projector(rho, eps):
    """Projector onto the eigenvectors of ρ with eigenvalue > eps."""
    if eps <= 0:
        raise ValidationError("Support threshold must be positive.", code="threshold")
    values, vectors = rho.eigh()
    kept = vectors[:, values > eps]
    return HermitianOperator(kept @ kept.conj().T)


def purity(rho):
    """tr(ρ²)."""
    return float(np.vdot(rho.entries, rho.entries).real)


def von_neumann_entropy(rho):
    """−Σ λ log λ in nats, over eigenvalues above ENTROPY_CUTOFF."""
    values = linalg.eigvalsh(rho.entries)
    values = values[values > ENTROPY_CUTOFF]
    return float(-np.sum(values * np.log(values)))


def expectation(rho, xi):
    """⟨ξ|ρ|ξ⟩."""
    return float(np.vdot(xi.amplitudes, rho.entries @ xi.amplitudes).real)


def random_pure_state(dim, rng):
    """Uniform on the unit sphere via normalized complex normal components."""
    return PureState.normalized(rng.standard_normal(dim) + 1j * rng.standard_normal(dim))


def random_density_matrix(dim, rng):
    """Random unitary conjugation of a random diagonal spectrum."""
    weights = rng.random(dim)
    weights /= weights.sum()
    unitary = unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.eye(1)
    return DensityMatrix.from_unnormalized((unitary * weights) @ unitary.conj().T)
