"""Zero-magnetisation subspace, pair-encoded logical qubits and embeddings.

Logical qubit ``l`` (1-based) lives on spins ``2l-2`` and ``2l-1`` (0-based),
with |0>_L = up-down and |1>_L = down-up.  Logical basis index ``k`` has its
most significant bit on logical qubit 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .spinlab import (
    MAX_SPINS,
    DimensionError,
    Operator,
    QuantumState,
    Space,
    SpaceKind,
    commutator_norm,
    pauli,
    spin_down_counts,
    total_z,
)

SYMMETRY_TOL = 1e-10
LEAKAGE_TOL = 1e-12
RENORMALIZE_MAX_LEAKAGE = 1e-6


class LeakageError(ValueError):
    """A state has support outside the subspace it is being mapped into."""


@dataclass(frozen=True)
class SpaceMap:
    n: int
    dfs_indices: np.ndarray = field(repr=False)
    logical_indices: np.ndarray = field(repr=False)

    @property
    def n_logical(self) -> int:
        return self.n // 2

    def indices(self, kind: SpaceKind) -> np.ndarray:
        """FULL-space basis integers spanned by a space of this kind."""
        if kind is SpaceKind.FULL:
            return np.arange(2**self.n)
        if kind is SpaceKind.DFS:
            return self.dfs_indices
        return self.logical_indices

    def positions(self, inner: SpaceKind, outer: SpaceKind) -> np.ndarray:
        """Where each basis vector of ``inner`` sits inside ``outer``."""
        small, big = self.indices(inner), self.indices(outer)
        pos = np.searchsorted(big, small)
        if len(small) > len(big) or not np.array_equal(big[np.minimum(pos, len(big) - 1)], small):
            raise ValueError(f"{inner.name} is not a subspace of {outer.name}")
        return pos


def dfs_basis(n: int) -> SpaceMap:
    """Enumerate the zero-magnetisation sector and its pair-encoded part."""
    if n < 2 or n % 2:
        raise ValueError(f"need an even spin count >= 2, got {n}")
    if n > MAX_SPINS:
        raise DimensionError(f"{n} spins exceeds the full-space cap of {MAX_SPINS}")
    return _dfs_basis(n)


@lru_cache(maxsize=None)
def _dfs_basis(n: int) -> SpaceMap:
    dfs = np.flatnonzero(spin_down_counts(n) == n // 2)
    n_l = n // 2
    logical = np.zeros(2**n_l, dtype=np.int64)
    for k in range(2**n_l):
        code = 0
        for l in range(n_l):
            bit = (k >> (n_l - 1 - l)) & 1
            code = (code << 2) | (0b10 if bit else 0b01)
        logical[k] = code
    dfs.setflags(write=False)
    logical.setflags(write=False)
    return SpaceMap(n, dfs, logical)


def bit_string(index: int, n: int) -> str:
    """Arrow notation for a FULL basis integer, e.g. 3 -> 'uudd' for n=4."""
    return "".join("d" if (index >> (n - 1 - i)) & 1 else "u" for i in range(n))


def _check_pair(l: int, n: int):
    if n % 2:
        raise ValueError(f"need an even spin count, got {n}")
    if not 1 <= l <= n // 2:
        raise IndexError(f"pair {l} out of range 1..{n // 2}")


def logical_op(kind: str, pair: int, n: int) -> Operator:
    """Tx, Ty or Tz on logical qubit ``pair`` (1-based), as a FULL operator."""
    _check_pair(pair, n)
    a, b = 2 * pair - 2, 2 * pair - 1
    P = {k: (pauli(k, a, n), pauli(k, b, n)) for k in "XYZ"}
    kind = kind.capitalize()
    if kind == "Tx":
        out = 0.5 * (P["X"][0] @ P["X"][1] + P["Y"][0] @ P["Y"][1])
    elif kind == "Ty":
        out = 0.5 * (P["Y"][0] @ P["X"][1] - P["X"][0] @ P["Y"][1])
    elif kind == "Tz":
        out = 0.5 * (P["Z"][0] - P["Z"][1])
    else:
        raise ValueError(f"unknown logical generator {kind!r}")
    return Operator(out.matrix, out.space, hermitian=True)


def logical_zz(pair1: int, pair2: int, n: int) -> Operator:
    """Logical ZZ between two pairs, realised as -Z Z on two physical spins.

    Uses the second spin of ``pair1`` and the first spin of ``pair2``.
    """
    _check_pair(pair1, n)
    _check_pair(pair2, n)
    if pair1 == pair2:
        raise ValueError("logical_zz needs two distinct pairs")
    zz = pauli("Z", 2 * pair1 - 1, n) @ pauli("Z", 2 * pair2 - 2, n)
    return Operator(-zz.matrix, zz.space, hermitian=True)


def check_symmetry(H: Operator) -> tuple[bool, float]:
    """Whether H commutes with total Z, plus max|[H, Z_t]| for diagnostics."""
    if H.space.kind is not SpaceKind.FULL:
        raise TypeError(f"symmetry check needs a FULL-space operator, got {H.space}")
    norm = commutator_norm(H, total_z(H.space.n))
    return norm < SYMMETRY_TOL, norm


def _space_for(kind: SpaceKind, n: int) -> Space:
    return Space(kind, n)


def restrict(H: Operator, target: SpaceKind) -> Operator:
    """Compress an operator onto a subspace: P^T H P via index selection."""
    smap = dfs_basis(H.space.n)
    pos = smap.positions(target, H.space.kind)
    space = _space_for(target, H.space.n)
    if H.rank_one is not None:
        coeff, v = H.rank_one
        return Operator.outer(v[pos], space, coeff)
    m = H.matrix[pos][:, pos]
    return Operator(m, space, H.hermitian, check=False)


def lift(H: Operator, target: SpaceKind) -> Operator:
    """Embed a subspace operator into a larger space, zero elsewhere."""
    smap = dfs_basis(H.space.n)
    pos = smap.positions(H.space.kind, target)
    space = _space_for(target, H.space.n)
    if H.rank_one is not None:
        coeff, v = H.rank_one
        big = np.zeros(space.dim, dtype=complex)
        big[pos] = v
        return Operator.outer(big, space, coeff)
    small = sp.coo_matrix(H.matrix)
    big = sp.csr_matrix(
        (small.data, (pos[small.row], pos[small.col])), shape=(space.dim, space.dim)
    )
    return Operator(big, space, H.hermitian, check=False)


def embed(psi: QuantumState, target: SpaceKind) -> QuantumState:
    """Map a state into another space via the index maps.

    Lifting into a larger space pads with zeros; mapping into a smaller one
    is allowed only if the state has no support outside it.
    """
    smap = dfs_basis(psi.space.n)
    space = _space_for(target, psi.space.n)
    src, dst = smap.indices(psi.space.kind), smap.indices(target)
    if len(src) <= len(dst):
        pos = smap.positions(psi.space.kind, target)
        out = np.zeros(space.dim, dtype=complex)
        out[pos] = psi.amplitudes
        return QuantumState(out, space, check=False)
    proj = project(psi, target)
    if proj.leakage > LEAKAGE_TOL:
        raise LeakageError(f"state has weight {proj.leakage:.3e} outside {space}")
    return proj.state


@dataclass(frozen=True)
class Projection:
    amplitudes: np.ndarray  # restricted, not renormalised
    leakage: float
    state: QuantumState | None  # renormalised, None when flagged

    @property
    def flagged(self) -> bool:
        return self.state is None


def project(psi: QuantumState, target: SpaceKind) -> Projection:
    """Restrict to a subspace and report the weight left outside it."""
    smap = dfs_basis(psi.space.n)
    pos = smap.positions(target, psi.space.kind)
    amps = psi.amplitudes[pos]
    kept = float(np.vdot(amps, amps).real)
    leakage = min(max(1.0 - kept, 0.0), 1.0)
    space = _space_for(target, psi.space.n)
    state = None
    if leakage < RENORMALIZE_MAX_LEAKAGE:
        state = QuantumState(amps / np.sqrt(kept), space, check=False)
    return Projection(amps, leakage, state)


def leakage(vec: np.ndarray, n: int, inner: SpaceKind, outer: SpaceKind = SpaceKind.FULL) -> float:
    """Weight of a raw vector (on ``outer``) outside ``inner``."""
    pos = dfs_basis(n).positions(inner, outer)
    total = float(np.vdot(vec, vec).real)
    kept = float(np.vdot(vec[pos], vec[pos]).real)
    return max(total - kept, 0.0)


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def cnot_circuit(n: int = 4) -> tuple[np.ndarray, float]:
    """Build CNOT(control=logical 1, target=logical 2) from DFS generators.

    CZ = e^{i pi/4} exp(-i pi/4 Tz1) exp(-i pi/4 Tz2) exp(i pi/4 Tz1 Tz2),
    then the target is rotated by exp(-+i pi/4 Ty2) on either side.
    Returns the 4x4 logical matrix and the leakage out of the logical space.
    """
    if n != 4:
        raise ValueError("the CNOT construction is defined for two logical qubits (n=4)")

    def expm(op: Operator, theta: float) -> np.ndarray:
        return la.expm(-1j * theta * op.toarray())

    tz1, tz2 = logical_op("Tz", 1, n), logical_op("Tz", 2, n)
    ty2 = logical_op("Ty", 2, n)
    zz = logical_zz(1, 2, n)
    cz = np.exp(1j * np.pi / 4) * expm(tz1, np.pi / 4) @ expm(tz2, np.pi / 4) @ expm(zz, -np.pi / 4)
    full = expm(ty2, np.pi / 4) @ cz @ expm(ty2, -np.pi / 4)
    pos = dfs_basis(n).logical_indices
    block = full[np.ix_(pos, pos)]
    outside = np.setdiff1d(np.arange(2**n), pos)
    leak = float(np.max(np.abs(full[np.ix_(outside, pos)]))) if len(outside) else 0.0
    return block, leak


def cnot_check(n: int = 4) -> float:
    """max |U - CNOT| after removing the global phase."""
    U, _ = cnot_circuit(n)
    ref = np.vdot(CNOT.ravel(), U.ravel())
    phase = ref / abs(ref)
    return float(np.max(np.abs(U / phase - CNOT)))
