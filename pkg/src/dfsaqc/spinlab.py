"""Pauli operators, pair Hamiltonians, eigensolvers and propagation.

Basis convention used across the package: a computational basis state of
``n`` spins is labelled by the integer whose bit ``i`` (most significant bit
is spin 0) is 0 for spin up and 1 for spin down.  Pauli Z therefore reads
+1 on up and -1 on down, and ``kron`` order puts spin 0 leftmost.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10
RESIDUAL_TOL = 1e-9
SPARSE_DENSITY = 0.10
SPARSE_MIN_DIM = 1024
KRYLOV_MIN_DIM = 4096
MAX_SPINS = 16

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class SpaceKind(enum.Enum):
    FULL = "full"
    DFS = "dfs"
    LOGICAL = "logical"


@dataclass(frozen=True)
class Space:
    """State-space tag.  ``n`` is always the number of physical spins."""

    kind: SpaceKind
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"spin count must be positive, got {self.n}")
        if self.kind is not SpaceKind.FULL and self.n % 2:
            raise ValueError(f"{self.kind.value} space needs an even spin count, got {self.n}")

    @classmethod
    def full(cls, n: int) -> "Space":
        return cls(SpaceKind.FULL, n)

    @classmethod
    def dfs(cls, n: int) -> "Space":
        return cls(SpaceKind.DFS, n)

    @classmethod
    def logical(cls, n_logical: int) -> "Space":
        return cls(SpaceKind.LOGICAL, 2 * n_logical)

    @property
    def n_logical(self) -> int:
        return self.n // 2

    @property
    def dim(self) -> int:
        if self.kind is SpaceKind.FULL:
            return 2**self.n
        if self.kind is SpaceKind.DFS:
            return comb(self.n, self.n // 2)
        return 2**self.n_logical

    def __str__(self):
        if self.kind is SpaceKind.LOGICAL:
            return f"LOGICAL({self.n_logical})"
        return f"{self.kind.name}({self.n})"


class Operator:
    """Immutable square matrix acting on a tagged space.

    Storage is sparse when the density is below 10% and dim >= 1024,
    dense otherwise.  Rank-one operators ``coeff * |v><v|`` keep their vector
    and only materialise the matrix on demand.
    """

    def __init__(self, matrix, space: Space, hermitian: bool = True, *, check: bool = True):
        if sp.issparse(matrix):
            matrix = sp.csr_matrix(matrix, dtype=complex)
        else:
            matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (space.dim, space.dim):
            raise ValueError(f"matrix shape {matrix.shape} does not fit {space} (dim {space.dim})")
        self._matrix = _choose_storage(matrix)
        self._outer = None
        self.space = space
        self.hermitian = hermitian
        if hermitian and check:
            dev = _max_abs(self._matrix - self._matrix.conj().T)
            if dev >= HERMITIAN_TOL:
                raise ValueError(f"operator flagged Hermitian but |A - A^H|_max = {dev:.3e}")

    @classmethod
    def outer(cls, vector, space: Space, coeff: complex = 1.0) -> "Operator":
        """``coeff * |v><v|`` for a (not necessarily normalised) vector."""
        vector = np.asarray(vector, dtype=complex)
        if vector.shape != (space.dim,):
            raise ValueError(f"vector length {vector.shape} does not fit {space}")
        op = cls.__new__(cls)
        op._matrix = None
        op._outer = (complex(coeff), vector.copy())
        op.space = space
        op.hermitian = abs(np.imag(coeff)) < HERMITIAN_TOL
        return op

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def rank_one(self):
        """``(coeff, vector)`` for rank-one operators, else None."""
        return self._outer

    @property
    def matrix(self):
        if self._matrix is None:
            coeff, v = self._outer
            nz = np.flatnonzero(v)
            if len(nz) ** 2 < SPARSE_DENSITY * self.dim**2 and self.dim >= SPARSE_MIN_DIM:
                rows, cols = np.meshgrid(nz, nz, indexing="ij")
                vals = coeff * np.outer(v[nz], v[nz].conj())
                self._matrix = sp.csr_matrix(
                    (vals.ravel(), (rows.ravel(), cols.ravel())), shape=(self.dim, self.dim)
                )
            else:
                self._matrix = coeff * np.outer(v, v.conj())
        return self._matrix

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def toarray(self) -> np.ndarray:
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.array(m)

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.space, self.hermitian, check=False)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        if self._outer is not None:
            coeff, v = self._outer
            return coeff * v * np.vdot(v, vec)
        return self.matrix @ vec

    def _check_space(self, other: "Operator"):
        if other.space != self.space:
            raise TypeError(f"space mismatch: {self.space} vs {other.space}")

    def __add__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        self._check_space(other)
        return Operator(
            _add(self.matrix, other.matrix), self.space, self.hermitian and other.hermitian, check=False
        )

    def __sub__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        if self._outer is not None:
            coeff, v = self._outer
            return Operator.outer(v, self.space, coeff * scalar)
        return Operator(
            self.matrix * scalar, self.space, self.hermitian and np.isreal(scalar), check=False
        )

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check_space(other)
            return Operator(self.matrix @ other.matrix, self.space, hermitian=False, check=False)
        return self.apply(np.asarray(other))

    def __repr__(self):
        kind = "rank-1" if self._outer is not None and self._matrix is None else (
            "sparse" if sp.issparse(self._matrix) else "dense"
        )
        return f"Operator({self.space}, {kind}, hermitian={self.hermitian})"

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Full eigendecomposition, cached (the operator is immutable)."""
        return la.eigh(self.toarray())


def _choose_storage(matrix):
    dim = matrix.shape[0]
    nnz = matrix.nnz if sp.issparse(matrix) else np.count_nonzero(matrix)
    if dim >= SPARSE_MIN_DIM and nnz < SPARSE_DENSITY * dim * dim:
        return sp.csr_matrix(matrix)
    return matrix.toarray() if sp.issparse(matrix) else matrix


def _add(a, b):
    if sp.issparse(a) and sp.issparse(b):
        return a + b
    a = a.toarray() if sp.issparse(a) else a
    b = b.toarray() if sp.issparse(b) else b
    return a + b


def _max_abs(m) -> float:
    if sp.issparse(m):
        return float(abs(m).max()) if m.nnz else 0.0
    return float(np.max(np.abs(m))) if m.size else 0.0


class QuantumState:
    """Normalised complex amplitude vector carrying its space tag."""

    def __init__(self, amplitudes, space: Space, *, check: bool = True):
        amps = np.array(amplitudes, dtype=complex)
        if amps.shape != (space.dim,):
            raise ValueError(f"{amps.shape[0]} amplitudes do not fit {space} (dim {space.dim})")
        if check:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"state not normalised: |psi| = {norm!r}")
        amps.setflags(write=False)
        self.amplitudes = amps
        self.space = space

    @classmethod
    def basis(cls, index: int, space: Space) -> "QuantumState":
        v = np.zeros(space.dim, dtype=complex)
        v[index] = 1.0
        return cls(v, space)

    @classmethod
    def normalized(cls, vector, space: Space) -> "QuantumState":
        v = np.asarray(vector, dtype=complex)
        return cls(v / np.linalg.norm(v), space)

    @property
    def dim(self) -> int:
        return self.space.dim

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "QuantumState") -> complex:
        """<self|other>."""
        if other.space != self.space:
            raise TypeError(f"space mismatch: {self.space} vs {other.space}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probability(self, index: int) -> float:
        return float(abs(self.amplitudes[index]) ** 2)

    def __repr__(self):
        return f"QuantumState({self.space})"


def pauli(kind: str, site: int, n: int) -> Operator:
    """Single-site Pauli ``kind`` on spin ``site`` (0-based) of ``n`` spins."""
    kind = kind.upper()
    if kind not in ("X", "Y", "Z"):
        raise ValueError(f"unknown Pauli kind {kind!r}")
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} spins")
    _guard(n)
    return Operator(_site_op(_PAULI[kind], site, n), Space.full(n))


def _site_op(single: np.ndarray, site: int, n: int):
    left = sp.identity(2**site, dtype=complex, format="csr")
    right = sp.identity(2 ** (n - site - 1), dtype=complex, format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(single)), right, format="csr")


def _guard(n: int):
    if n > MAX_SPINS:
        raise DimensionError(f"{n} spins exceeds the full-space cap of {MAX_SPINS}")


class DimensionError(ValueError):
    """A requested construction exceeds the package's dimension guards."""


def spin_down_counts(n: int) -> np.ndarray:
    """Number of down spins of every basis state (popcount of the index)."""
    idx = np.arange(2**n, dtype=np.int64)
    counts = np.zeros_like(idx)
    for bit in range(n):
        counts += (idx >> bit) & 1
    return counts


def total_z(n: int) -> Operator:
    """Sum of Z over all spins; diagonal with entry (#up - #down)."""
    if n < 1:
        raise ValueError("need at least one spin")
    _guard(n)
    diag = n - 2 * spin_down_counts(n)
    return Operator(sp.diags(diag.astype(complex), format="csr"), Space.full(n))


def _pair_sum(n: int, kinds, coeff: float):
    if n % 2:
        raise ValueError(f"pair Hamiltonians need an even spin count, got {n}")
    _guard(n)
    total = sp.csr_matrix((2**n, 2**n), dtype=complex)
    for first in range(0, n, 2):
        for kind in kinds:
            total = total + _site_op(_PAULI[kind], first, n) @ _site_op(_PAULI[kind], first + 1, n)
    return Operator(coeff * total, Space.full(n))


def xx_pairs(n: int) -> Operator:
    """Ferromagnetic XX coupling inside each spin pair, pairs not coupled."""
    return _pair_sum(n, ("X", "Y"), -1.0)


def xxx_pairs(n: int, J: float = 1.0) -> Operator:
    """Antiferromagnetic Heisenberg coupling J inside each spin pair."""
    if J <= 0:
        raise ValueError(f"coupling J must be positive for a singlet ground state, got {J}")
    return _pair_sum(n, ("X", "Y", "Z"), float(J))


def evolve(H: Operator, psi: QuantumState, t: float) -> QuantumState:
    """Return exp(-i H t) psi for a time-independent Hermitian H.

    Rank-one operators use the closed form, dense ones a cached
    eigendecomposition, and sparse ones above 4096 dimensions Krylov-type
    action of the exponential.
    """
    if H.space != psi.space:
        raise TypeError(f"space mismatch: H on {H.space}, state on {psi.space}")
    if not H.hermitian:
        raise ValueError("evolve needs a Hermitian generator")
    if t == 0:
        return psi
    out = propagate(H, psi.amplitudes, t)
    norm = np.linalg.norm(out)
    if abs(norm - 1.0) > NORM_TOL:
        raise FloatingPointError(f"propagation lost normalisation: |psi| = {norm!r}")
    return QuantumState(out, psi.space, check=False)


def propagate(H: Operator, vec: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) applied to a raw vector (no normalisation assumed)."""
    if H.rank_one is not None:
        coeff, v = H.rank_one
        vv = np.vdot(v, v).real
        if vv == 0:
            return np.array(vec, dtype=complex)
        # exp(-i c t |v><v|) = 1 + (exp(-i c t <v|v>) - 1) |v><v| / <v|v>
        return vec + (np.exp(-1j * coeff * t * vv) - 1.0) * v * (np.vdot(v, vec) / vv)
    if H.is_sparse and H.dim > KRYLOV_MIN_DIM:
        return spla.expm_multiply(-1j * t * H.matrix, vec)
    evals, evecs = H.eigh
    return evecs @ (np.exp(-1j * evals * t) * (evecs.conj().T @ vec))


def eig_lowest(H: Operator, k: int) -> list[tuple[float, np.ndarray]]:
    """The ``k`` smallest eigenpairs of a Hermitian operator, ascending."""
    if k < 1 or k > H.dim:
        raise ValueError(f"cannot take {k} eigenpairs of a {H.dim}-dimensional operator")
    if not H.hermitian:
        raise ValueError("eig_lowest needs a Hermitian operator")
    if H.is_sparse and H.dim > KRYLOV_MIN_DIM and k < H.dim // 2:
        evals, evecs = spla.eigsh(H.matrix, k=k, which="SA", tol=1e-13)
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
    else:
        evals, evecs = la.eigh(H.toarray(), subset_by_index=[0, k - 1])
    residual = np.linalg.norm(H.matrix @ evecs - evecs * evals, axis=0)
    if residual.max(initial=0.0) > RESIDUAL_TOL * max(1.0, np.abs(evals).max()):
        raise FloatingPointError(f"eigensolver residual {residual.max():.3e} above tolerance")
    return [(float(evals[j]), evecs[:, j]) for j in range(k)]


def commutator_norm(A: Operator, B: Operator) -> float:
    """max |[A, B]_ij|."""
    a, b = A.matrix, B.matrix
    return _max_abs(a @ b - b @ a)
