"""Truncated Fock-space linear algebra: states, operators, tensor products, partial traces.

Conventions used everywhere in this package:
  - spin subsystem (when present) comes first in the layout, |g> = index 0,
    |e> = index 1, |+> = (|g> + |e>)/sqrt(2)
  - quadratures X = (a + a^dag)/sqrt(2), P = i(a^dag - a)/sqrt(2)  (hbar = 1)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

NORM_TOL = 1e-10
HERM_TOL = 1e-12
COHERENT_LEAK_TOL = 1e-6


class InvalidDimensionError(ValueError):
    """Raised when a cutoff or layout is too small / inconsistent."""


class LayoutMismatchError(ValueError):
    """Raised when two objects with incompatible subsystem layouts are combined."""


class CutoffTooSmallError(ValueError):
    """Raised when a state's analytic out-of-cutoff population exceeds tolerance."""

    def __init__(self, leaked: float, cutoff: int):
        self.leaked = leaked
        self.cutoff = cutoff
        super().__init__(
            f"population {leaked:.3e} beyond cutoff {cutoff} exceeds {COHERENT_LEAK_TOL:.0e}"
        )


def _as_layout(layout) -> tuple[int, ...]:
    layout = tuple(int(d) for d in layout)
    if not layout or any(d < 1 for d in layout):
        raise InvalidDimensionError(f"bad layout {layout}")
    return layout


@dataclass(frozen=True)
class FockVector:
    """Pure state on a (spin tensor) truncated Fock space, unit norm."""

    amplitudes: np.ndarray
    layout: tuple[int, ...]

    def __post_init__(self):
        layout = _as_layout(self.layout)
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size != int(np.prod(layout)):
            raise LayoutMismatchError(
                f"amplitude length {amps.size} != prod of layout {layout}"
            )
        norm = float(np.linalg.norm(amps))
        if norm == 0.0:
            raise ValueError("zero vector cannot be normalized")
        if abs(norm - 1.0) > NORM_TOL:
            amps = amps / norm
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def overlap(self, other: "FockVector") -> complex:
        if self.layout != other.layout:
            raise LayoutMismatchError(f"{self.layout} vs {other.layout}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class DenseOperator:
    """Dense complex square matrix acting on a fixed subsystem layout."""

    entries: np.ndarray
    layout: tuple[int, ...]

    def __post_init__(self):
        layout = _as_layout(self.layout)
        m = np.asarray(self.entries, dtype=np.complex128)
        d = int(np.prod(layout))
        if m.shape != (d, d):
            raise LayoutMismatchError(f"matrix shape {m.shape} != ({d}, {d})")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dag(self) -> "DenseOperator":
        return DenseOperator(self.entries.conj().T, self.layout)

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        return float(np.abs(self.entries - self.entries.conj().T).max()) < tol

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            if self.layout != other.layout:
                raise LayoutMismatchError(f"{self.layout} vs {other.layout}")
            return DenseOperator(self.entries @ other.entries, self.layout)
        if isinstance(other, FockVector):
            if self.layout != other.layout:
                raise LayoutMismatchError(f"{self.layout} vs {other.layout}")
            return FockVector(self.entries @ other.amplitudes, self.layout)
        return NotImplemented

    def apply_raw(self, other: FockVector) -> np.ndarray:
        """Matrix-vector product without renormalization (expectation values)."""
        if self.layout != other.layout:
            raise LayoutMismatchError(f"{self.layout} vs {other.layout}")
        return self.entries @ other.amplitudes

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        if self.layout != other.layout:
            raise LayoutMismatchError(f"{self.layout} vs {other.layout}")
        return DenseOperator(self.entries + other.entries, self.layout)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        if self.layout != other.layout:
            raise LayoutMismatchError(f"{self.layout} vs {other.layout}")
        return DenseOperator(self.entries - other.entries, self.layout)

    def __mul__(self, scalar) -> "DenseOperator":
        return DenseOperator(self.entries * scalar, self.layout)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix on a subsystem layout."""

    entries: np.ndarray
    layout: tuple[int, ...]

    def __post_init__(self):
        layout = _as_layout(self.layout)
        m = np.asarray(self.entries, dtype=np.complex128)
        d = int(np.prod(layout))
        if m.shape != (d, d):
            raise LayoutMismatchError(f"matrix shape {m.shape} != ({d}, {d})")
        if float(np.abs(m - m.conj().T).max()) > 1e-10:
            raise ValueError("density matrix not Hermitian within 1e-10")
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace {tr} != 1 within 1e-10")
        lo = float(np.linalg.eigvalsh(m).min())
        if lo < -1e-8:
            raise ValueError(f"density matrix has eigenvalue {lo} < -1e-8")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def ladder(cutoff: int, kind: str) -> DenseOperator:
    """Truncated annihilation / creation / number operator on one mode."""
    if cutoff < 2:
        raise InvalidDimensionError(f"cutoff {cutoff} < 2")
    n = np.arange(1, cutoff)
    a = np.zeros((cutoff, cutoff), dtype=np.complex128)
    a[n - 1, n] = np.sqrt(n)
    if kind == "annihilate":
        m = a
    elif kind == "create":
        m = a.conj().T
    elif kind == "number":
        m = np.diag(np.arange(cutoff).astype(np.complex128))
    else:
        raise ValueError(f"unknown ladder kind {kind!r}")
    return DenseOperator(m, (cutoff,))


def quadrature(cutoff: int, kind: str) -> DenseOperator:
    """X = (a + a^dag)/sqrt(2) or P = i(a^dag - a)/sqrt(2)."""
    a = ladder(cutoff, "annihilate").entries
    if kind == "X":
        m = (a + a.conj().T) / np.sqrt(2.0)
    elif kind == "P":
        m = 1j * (a.conj().T - a) / np.sqrt(2.0)
    else:
        raise ValueError(f"unknown quadrature kind {kind!r}")
    return DenseOperator(m, (cutoff,))


def identity(layout) -> DenseOperator:
    layout = _as_layout(layout)
    return DenseOperator(np.eye(int(np.prod(layout)), dtype=np.complex128), layout)


def fock_state(n: int, cutoff: int) -> FockVector:
    if not 0 <= n < cutoff:
        raise InvalidDimensionError(f"Fock index {n} outside [0, {cutoff})")
    amps = np.zeros(cutoff, dtype=np.complex128)
    amps[n] = 1.0
    return FockVector(amps, (cutoff,))


def vacuum(cutoff: int) -> FockVector:
    return fock_state(0, cutoff)


def coherent_leakage(alpha: complex, cutoff: int) -> float:
    """Analytic Poisson-tail population of |alpha> beyond the cutoff."""
    mu = abs(alpha) ** 2
    return float(gammainc(cutoff, mu))


def coherent(alpha: complex, cutoff: int) -> FockVector:
    """Coherent state, renormalized after truncation.

    Rejects amplitudes whose analytic out-of-cutoff population exceeds 1e-6.
    """
    if cutoff < 2:
        raise InvalidDimensionError(f"cutoff {cutoff} < 2")
    leaked = coherent_leakage(alpha, cutoff)
    if leaked >= COHERENT_LEAK_TOL:
        raise CutoffTooSmallError(leaked, cutoff)
    amps = np.empty(cutoff, dtype=np.complex128)
    amps[0] = 1.0
    for n in range(1, cutoff):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    amps *= np.exp(-abs(alpha) ** 2 / 2.0)
    return FockVector(amps, (cutoff,))


def spin_plus_state() -> FockVector:
    return FockVector(np.array([1.0, 1.0]) / np.sqrt(2.0), (2,))


def pauli(kind: str) -> DenseOperator:
    """Pauli operators in the {|g>=0, |e>=1} basis; sigma_+ = |e><g|."""
    mats = {
        "x": np.array([[0, 1], [1, 0]]),
        "y": np.array([[0, 1j], [-1j, 0]]),  # note basis order |g>, |e>
        "z": np.array([[-1, 0], [0, 1]]),
        "+": np.array([[0, 0], [1, 0]]),
        "-": np.array([[0, 1], [0, 0]]),
    }
    if kind not in mats:
        raise ValueError(f"unknown Pauli kind {kind!r}")
    return DenseOperator(np.asarray(mats[kind], dtype=np.complex128), (2,))


def tensor(a, b):
    """Kronecker composition of two vectors or two operators."""
    if isinstance(a, FockVector) and isinstance(b, FockVector):
        return FockVector(np.kron(a.amplitudes, b.amplitudes), a.layout + b.layout)
    if isinstance(a, DenseOperator) and isinstance(b, DenseOperator):
        return DenseOperator(np.kron(a.entries, b.entries), a.layout + b.layout)
    raise TypeError("tensor requires two FockVectors or two DenseOperators")


def partial_trace(state, keep: int) -> DensityMatrix:
    """Reduced density matrix over the kept subsystem index."""
    layout = state.layout
    if len(layout) < 2:
        raise LayoutMismatchError("partial_trace needs >= 2 subsystems")
    if not 0 <= keep < len(layout):
        raise IndexError(f"keep index {keep} out of range for layout {layout}")
    k = len(layout)
    if isinstance(state, FockVector):
        psi = state.amplitudes.reshape(layout)
        others = [i for i in range(k) if i != keep]
        m = np.transpose(psi, [keep] + others).reshape(layout[keep], -1)
        rho = m @ m.conj().T
    elif isinstance(state, DensityMatrix):
        r = state.entries.reshape(layout + layout)
        for i in reversed([i for i in range(k) if i != keep]):
            r = np.trace(r, axis1=i, axis2=i + r.ndim // 2)
        rho = r
    else:
        raise TypeError("partial_trace requires a FockVector or DensityMatrix")
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho, (layout[keep],))
