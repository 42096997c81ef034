"""States, operators, fidelities and measurement sampling for the spin register.

The full register holds four qubits: the electron (qubit 0) and three
nuclei (qubits 1-3). Basis ordering is ``|e n1 n2 n3>`` with the electron
as the most significant bit and down/0 listed first, so basis index
``k = 8*e + 4*n1 + 2*n2 + n3``. Subspace objects (single qubits, nuclear
pairs, the nuclear triple) use the same big-endian bit convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

N_QUBITS = 4
DIM = 16
BASIS_ORDER = "e n1 n2 n3"

NORM_ATOL = 1e-10
UNITARY_ATOL = 1e-10
TRACE_ATOL = 1e-9
EIGVAL_ATOL = 1e-8


class DimensionError(ValueError):
    """Operator/state dimension mismatch."""


def basis_index(e: int, n1: int, n2: int, n3: int) -> int:
    return 8 * e + 4 * n1 + 2 * n2 + n3


def config_index(config) -> int:
    """Nuclear configuration (n1, n2, n3) -> integer 0..7, n1 most significant."""
    n1, n2, n3 = config
    return 4 * n1 + 2 * n2 + n3


def config_bits(index: int) -> tuple[int, int, int]:
    return ((index >> 2) & 1, (index >> 1) & 1, index & 1)


@dataclass(frozen=True)
class PureState:
    """Normalized state vector on a power-of-two dimensional register."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size & (amps.size - 1):
            raise DimensionError(f"amplitude vector of length {amps.size} is not a qubit register")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"state norm {norm} too far from 1")
        amps = amps / norm
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    @classmethod
    def from_basis(cls, index: int, dim: int = DIM) -> "PureState":
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def register_basis(cls, e: int, n1: int, n2: int, n3: int) -> "PureState":
        return cls.from_basis(basis_index(e, n1, n2, n3))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_error(self) -> float:
        return abs(np.vdot(self.amplitudes, self.amplitudes).real - 1.0)

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()))

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis_order": BASIS_ORDER if self.dim == DIM else f"subspace dim {self.dim}",
                "amplitudes": [[z.real, z.imag] for z in self.amplitudes],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PureState":
        doc = json.loads(text)
        amps = np.array([complex(re, im) for re, im in doc["amplitudes"]])
        return cls(amps)


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace operator; physicality enforced by `project_physical`."""

    matrix: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix with shape {m.shape}")
        if self.validate:
            if np.max(np.abs(m - m.conj().T)) > 1e-8:
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(m).real - 1.0) > 1e-6:
                raise ValueError(f"density matrix trace {np.trace(m)} too far from 1")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def trace_error(self) -> float:
        return abs(np.trace(self.matrix).real - 1.0)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def project_physical(self) -> "DensityOperator":
        """Clip negative eigenvalues to zero and renormalize the trace."""
        herm = (self.matrix + self.matrix.conj().T) / 2
        vals, vecs = np.linalg.eigh(herm)
        vals = np.clip(vals, 0.0, None)
        m = (vecs * vals) @ vecs.conj().T
        return DensityOperator(m / np.trace(m).real)

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis_order": BASIS_ORDER if self.dim == DIM else f"subspace dim {self.dim}",
                "matrix": [[[z.real, z.imag] for z in row] for row in self.matrix],
            }
        )

    @classmethod
    def from_json(cls, text: str, validate: bool = True) -> "DensityOperator":
        doc = json.loads(text)
        m = np.array([[complex(re, im) for re, im in row] for row in doc["matrix"]])
        return cls(m, validate=validate)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim)


def is_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and \
        np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= atol


def check_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError(f"operator with shape {u.shape} is not square")
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > atol:
        raise ValueError(f"operator is not unitary (deviation {err:.2e})")
    return u


def apply_unitary(state: PureState, u: np.ndarray, targets) -> PureState:
    """Apply `u` to the listed target qubits of `state`.

    `u` must be a 2^|targets| unitary; remaining qubits are untouched.
    Targets are qubit positions in the state's big-endian bit order.
    """
    targets = tuple(targets)
    n = state.n_qubits
    if len(set(targets)) != len(targets) or any(t < 0 or t >= n for t in targets):
        raise DimensionError(f"bad target set {targets} for {n} qubits")
    u = check_unitary(u)
    k = len(targets)
    if u.shape != (2 ** k, 2 ** k):
        raise DimensionError(f"unitary shape {u.shape} does not match {k} targets")
    psi = state.amplitudes.reshape([2] * n)
    psi = np.tensordot(u.reshape([2] * (2 * k)), psi, axes=(range(k, 2 * k), targets))
    # tensordot moved the target axes to the front; restore original order
    order = list(targets) + [q for q in range(n) if q not in targets]
    psi = np.moveaxis(psi, range(n), order)
    return PureState(psi.reshape(-1))


def state_fidelity(rho: DensityOperator, target: PureState) -> float:
    """Overlap <psi|rho|psi>, clipped to [0, 1 + 1e-9]."""
    if rho.dim != target.dim:
        raise DimensionError(f"density dim {rho.dim} != state dim {target.dim}")
    f = np.real(np.vdot(target.amplitudes, rho.matrix @ target.amplitudes))
    return float(np.clip(f, 0.0, 1.0 + 1e-9))


def state_overlap(a: PureState, b: PureState) -> float:
    if a.dim != b.dim:
        raise DimensionError(f"state dims {a.dim} != {b.dim}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def unitary_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Entanglement-style operator overlap |tr(U^dag V)|^2 / d^2."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise DimensionError(f"operator shapes {u.shape} != {v.shape}")
    d = u.shape[0]
    return float(abs(np.trace(u.conj().T @ v)) ** 2 / d ** 2)


def sample_measurement(state: PureState, shots: int, rng) -> np.ndarray:
    """Multinomial basis-outcome counts. `rng` is a Generator or an integer seed."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    p = state.probabilities()
    return rng.multinomial(shots, p / p.sum())
