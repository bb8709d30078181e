"""Continuous-time Grover search: H = -|s><s| - |w><w| and its closed form."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp

from .dfs_code import dfs_basis
from .spinlab import Operator, QuantumState, Space, SpaceKind


@dataclass(frozen=True)
class GroverInstance:
    space: Space
    w_index: int

    def __post_init__(self):
        if self.space.kind is SpaceKind.FULL:
            raise ValueError("Grover search runs in the DFS sector or the logical subspace")
        if not 0 <= self.w_index < self.N:
            raise ValueError(f"marked index {self.w_index} outside 0..{self.N - 1}")

    @classmethod
    def logical(cls, n_logical: int, w_index: int = 0) -> "GroverInstance":
        return cls(Space.logical(n_logical), w_index)

    @property
    def N(self) -> int:
        return self.space.dim

    @property
    def x(self) -> float:
        return 1.0 / np.sqrt(self.N)

    def marked_state(self) -> QuantumState:
        return QuantumState.basis(self.w_index, self.space)

    def r_state(self) -> QuantumState:
        """(|s> - x|w>)/sqrt(1 - x^2)."""
        s = uniform_state(self.space).amplitudes
        w = self.marked_state().amplitudes
        return QuantumState((s - self.x * w) / np.sqrt(1 - self.x**2), self.space)


def uniform_state(space: Space) -> QuantumState:
    return QuantumState(np.full(space.dim, 1 / np.sqrt(space.dim), dtype=complex), space)


def oracle_h(inst: GroverInstance) -> Operator:
    """-|w><w|."""
    return Operator.outer(inst.marked_state().amplitudes, inst.space, -1.0)


def driver_h(space: Space) -> Operator:
    """-|s><s|."""
    return Operator.outer(uniform_state(space).amplitudes, space, -1.0)


def grover_h(inst: GroverInstance) -> Operator:
    return driver_h(inst.space) + oracle_h(inst)


def analytic_amplitudes(t, N: int):
    """Amplitudes on |w> and |r> of exp(-iHt)|s>; vectorised over t."""
    if N < 2:
        raise ValueError("search space needs N >= 2")
    t = np.asarray(t, dtype=float)
    x = 1 / np.sqrt(N)
    phase = np.exp(1j * t)
    a_w = phase * (x * np.cos(x * t) + 1j * np.sin(x * t))
    a_r = phase * np.sqrt(1 - x**2) * np.cos(x * t)
    return a_w, a_r


def success_probability(t, N: int):
    a_w, _ = analytic_amplitudes(t, N)
    return np.abs(a_w) ** 2


def optimal_time(N: int) -> float:
    """Argmax of the success probability, t* = (pi/2) sqrt(N)."""
    return 0.5 * np.pi * np.sqrt(N)


def quoted_time(N: int) -> float:
    """pi sqrt(N), the stopping time quoted alongside the closed form."""
    return np.pi * np.sqrt(N)


def _raise_lower(n: int, site: int, raising: bool):
    # sigma = |up><down|; with up = bit 0 the raising operator maps index bit 1 -> 0
    op = np.array([[0, 1], [0, 0]] if raising else [[0, 0], [1, 0]], dtype=complex)
    return sp.kron(
        sp.kron(sp.identity(2**site, format="csr"), sp.csr_matrix(op)),
        sp.identity(2 ** (n - site - 1), format="csr"),
        format="csr",
    )


def driver_strings(n: int, *, hermitian_conjugate: bool = True):
    """Yield every sigma^dag...sigma^dag sigma...sigma string of the driver.

    For each k = 1..n/2 and each set of 2k sites, every split into k raised
    and k lowered sites is produced once per conjugate pair (the lowest site
    is raised); with ``hermitian_conjugate`` the conjugate string follows.
    Splits are not restricted to "raised sites first", otherwise
    interleaved flips such as uddu <-> duud would be missing.
    """
    for k in range(1, n // 2 + 1):
        for sites in itertools.combinations(range(n), 2 * k):
            first, rest = sites[0], sites[1:]
            for others in itertools.combinations(rest, k - 1):
                raised = {first, *others}
                term = sp.identity(2**n, dtype=complex, format="csr")
                for site in sites:
                    term = term @ _raise_lower(n, site, raising=site in raised)
                yield term
                if hermitian_conjugate:
                    yield term.conj().T.tocsr()


def driver_string_sum(n: int):
    total = sp.csr_matrix((2**n, 2**n), dtype=complex)
    for term in driver_strings(n):
        total = total + term
    return total


def driver_string_check(n: int) -> float:
    """Max deviation of the sector-projected string sum from N|s><s| - 1.

    The string sum reproduces the off-diagonal part of N|s><s| inside the
    zero-magnetisation sector; the check compares P (sum) P against
    N_sec |s><s| - 1_sec with |s> uniform over the sector.
    """
    if n % 2 or n < 2:
        raise ValueError(f"need an even spin count, got {n}")
    if n > 8:
        raise ValueError("string enumeration is limited to n <= 8")
    pos = dfs_basis(n).dfs_indices
    block = driver_string_sum(n)[pos][:, pos].toarray()
    n_sec = comb(n, n // 2)
    expected = np.ones((n_sec, n_sec)) - np.eye(n_sec)
    return float(np.max(np.abs(block - expected)))
