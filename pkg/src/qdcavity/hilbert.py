"""Truncated qubit (x) Fock space: ladder operators, states and bipartite maps.

Conventions used throughout the package:

* qubit basis ordered ``(g, e)``; the lowering operator is ``sigma = |g><e|``;
* the joint basis is ``(g,0), (g,1), ..., (g,n_max-1), (e,0), ...``, i.e. the
  qubit is the slow (outer) index and joint index = ``q * n_max + n``;
* operators and density matrices are plain complex ``numpy`` arrays.  Which
  space an array lives on is read off its shape (2 for the qubit, ``n_max``
  for the field, ``2 * n_max`` for the joint space).
"""

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

Subsystem = Literal["qubit", "field"]

MIN_LEVELS = 5

# tolerances for DensityMatrix validity
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
PSD_TOL = 1e-9
NORM_TOL = 1e-12


@dataclass(frozen=True)
class FockCutoff:
    """Number of retained Fock levels, ``|0> ... |n_max - 1>``."""

    n_max: int = 15

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < MIN_LEVELS:
            raise ValueError(
                f"n_max must be an integer >= {MIN_LEVELS} (got {self.n_max!r})"
            )

    @property
    def joint_dim(self) -> int:
        return 2 * self.n_max


def _levels(cutoff) -> int:
    if isinstance(cutoff, FockCutoff):
        return cutoff.n_max
    return FockCutoff(int(cutoff)).n_max


def annihilation(cutoff) -> np.ndarray:
    """Bosonic lowering operator with ``<n-1|a|n> = sqrt(n)``.

    ``cutoff`` may be a :class:`FockCutoff` or a plain level count.  Plain
    counts below ``MIN_LEVELS`` are accepted here so the operator can be used
    on small auxiliary spaces; only the physics entry points enforce the bound.
    """
    n = cutoff.n_max if isinstance(cutoff, FockCutoff) else int(cutoff)
    if n < 1:
        raise ValueError("need at least one Fock level")
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def number_operator(cutoff) -> np.ndarray:
    n = cutoff.n_max if isinstance(cutoff, FockCutoff) else int(cutoff)
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def qubit_lowering() -> np.ndarray:
    """``sigma = |g><e|`` in the ``(g, e)`` basis."""
    return np.array([[0, 1], [0, 0]], dtype=complex)


def _check_square(op, name):
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {op.shape}")
    return op


def tensor(qubit_op, field_op) -> np.ndarray:
    """Embed ``qubit_op (x) field_op`` in the joint space (qubit index outer)."""
    qubit_op = _check_square(qubit_op, "qubit_op")
    field_op = _check_square(field_op, "field_op")
    if qubit_op.shape[0] != 2:
        raise ValueError(f"qubit_op must be 2x2, got {qubit_op.shape}")
    if field_op.shape[0] < MIN_LEVELS:
        raise ValueError(
            f"field_op must act on >= {MIN_LEVELS} Fock levels, got {field_op.shape}"
        )
    return np.kron(qubit_op, field_op)


def joint_operators(cutoff):
    """Return the joint-space embeddings ``(a, sigma)`` = ``(I2 (x) a, sigma (x) In)``."""
    n = _levels(cutoff)
    a = tensor(np.eye(2, dtype=complex), annihilation(n))
    sigma = tensor(qubit_lowering(), np.eye(n, dtype=complex))
    return a, sigma


def fock_superposition(amplitudes: Sequence[complex], cutoff) -> np.ndarray:
    """Field vector ``sum_k c_k |k>`` from explicit Fock amplitudes.

    The amplitudes must already be normalised; the three-photon family
    ``c_0|0> + c_1|3> + ... + c_n|3n>`` is obtained by placing the
    coefficients at multiples of three.
    """
    n = _levels(cutoff)
    amps = np.asarray(amplitudes, dtype=complex)
    if amps.ndim != 1 or amps.size > n:
        raise ValueError(f"expected at most {n} amplitudes, got shape {amps.shape}")
    norm = np.vdot(amps, amps).real
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"amplitudes are not normalised (norm^2 = {norm!r})")
    psi = np.zeros(n, dtype=complex)
    psi[: amps.size] = amps
    return psi


def three_photon_state(beta: complex, cutoff) -> np.ndarray:
    """``beta|0> + sqrt(1 - |beta|^2)|3>`` on the truncated field space."""
    n = _levels(cutoff)
    beta = complex(beta)
    weight = abs(beta) ** 2
    if weight > 1.0:
        raise ValueError(f"|beta| must be <= 1 (got |beta| = {abs(beta)!r})")
    psi = np.zeros(n, dtype=complex)
    psi[0] = beta
    psi[3] = np.sqrt(1.0 - weight)
    return psi


def qubit_state(theta: float) -> np.ndarray:
    return np.array([np.cos(theta), np.sin(theta)], dtype=complex)


def initial_condition(theta: float, beta: complex, cutoff) -> np.ndarray:
    """Pure joint state ``(cos(theta)|g> + sin(theta)|e>) (x) (beta|0> + ...|3>)``."""
    psi = np.kron(qubit_state(theta), three_photon_state(beta, cutoff))
    return np.outer(psi, psi.conj())


def basis_state(q: int, n: int, cutoff) -> np.ndarray:
    """Joint basis ket ``|q, n>`` with ``q = 0`` for g and ``q = 1`` for e."""
    levels = _levels(cutoff)
    psi = np.zeros(2 * levels, dtype=complex)
    psi[q * levels + n] = 1.0
    return psi


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def _joint_blocks(rho):
    rho = _check_square(rho, "rho")
    dim = rho.shape[0]
    if dim % 2 or dim // 2 < MIN_LEVELS:
        raise ValueError(f"not a joint qubit-field matrix (dimension {dim})")
    n = dim // 2
    return rho.reshape(2, n, 2, n), n


def partial_trace(rho, keep: Subsystem) -> np.ndarray:
    """Reduced density matrix of the ``keep`` subsystem."""
    blocks, _ = _joint_blocks(rho)
    if keep == "qubit":
        return np.einsum("injn->ij", blocks)
    if keep == "field":
        return np.einsum("imin->mn", blocks)
    raise ValueError(f"keep must be 'qubit' or 'field', got {keep!r}")


def partial_transpose(rho, subsystem: Subsystem) -> np.ndarray:
    """Transpose the indices of one subsystem of a joint matrix."""
    blocks, n = _joint_blocks(rho)
    if subsystem == "qubit":
        out = blocks.transpose(2, 1, 0, 3)
    elif subsystem == "field":
        out = blocks.transpose(0, 3, 2, 1)
    else:
        raise ValueError(f"subsystem must be 'qubit' or 'field', got {subsystem!r}")
    return out.reshape(2 * n, 2 * n)


@dataclass(frozen=True)
class StateDiagnostics:
    hermiticity: float
    trace_error: float
    min_eigenvalue: float

    @property
    def ok(self) -> bool:
        return (
            self.hermiticity <= HERMITIAN_TOL
            and self.trace_error <= TRACE_TOL
            and self.min_eigenvalue >= -PSD_TOL
        )


def diagnose(rho) -> StateDiagnostics:
    """Hermiticity residue, trace error and smallest eigenvalue of ``rho``."""
    rho = _check_square(rho, "rho")
    herm = float(np.max(np.abs(rho - rho.conj().T))) if rho.size else 0.0
    trace_error = float(abs(np.trace(rho) - 1.0))
    hermitian_part = 0.5 * (rho + rho.conj().T)
    min_eig = float(np.linalg.eigvalsh(hermitian_part)[0])
    return StateDiagnostics(herm, trace_error, min_eig)


def is_density_matrix(rho) -> bool:
    return diagnose(rho).ok
