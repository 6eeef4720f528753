"""Ideal continuous-variable gate unitaries on bare motional modes.

These are the targets the ion dynamics must approximate:

    Phase(theta):          exp(-i theta n)
    Displace(alpha):       exp(alpha a^dag - alpha* a)
    Squeeze(r, phi):       exp((z* a^2 - z a^dag^2)/2),  z = r e^{i phi}
    Kerr(tau):             exp(i tau a^dag^2 a^2 / 2)
    Trisqueeze(r, phi):    exp(-i r (a^dag^3 e^{i phi} + a^3 e^{-i phi}))
    BeamSplitter(th, phi): exp(-i th (a b^dag e^{i phi} + a^dag b e^{-i phi}))
    TwoModeSqueeze(r, phi): exp(i r (a b e^{i phi} + a^dag b^dag e^{-i phi}))
"""

from __future__ import annotations

import numpy as np

from .fock import DenseOperator, InvalidDimensionError, LayoutMismatchError, ladder
from .ion import (
    BeamSplitter,
    Displace,
    GateSpec,
    Kerr,
    Phase,
    Squeeze,
    Trisqueeze,
    TwoModeSqueeze,
    gate_mode_count,
)


def _expm_from_hermitian_exponent(h: np.ndarray) -> np.ndarray:
    """exp(-i h) for Hermitian h, exactly unitary by construction."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def ideal_unitary(gate: GateSpec, cutoffs) -> DenseOperator:
    """Ideal gate unitary on the truncated motional space(s)."""
    cutoffs = tuple(int(n) for n in cutoffs)
    if any(n < 2 for n in cutoffs):
        raise InvalidDimensionError(f"bad cutoffs {cutoffs}")
    if len(cutoffs) != gate_mode_count(gate):
        raise LayoutMismatchError(
            f"{type(gate).__name__} needs {gate_mode_count(gate)} modes, got {len(cutoffs)}"
        )
    n0 = cutoffs[0]
    n_diag = np.arange(n0)

    if isinstance(gate, Phase):
        u = np.diag(np.exp(-1j * gate.theta * n_diag))
        return DenseOperator(u, cutoffs)

    if isinstance(gate, Kerr):
        u = np.diag(np.exp(1j * gate.tau * n_diag * (n_diag - 1) / 2.0))
        return DenseOperator(u, cutoffs)

    a = ladder(n0, "annihilate").entries
    ad = a.conj().T

    if isinstance(gate, Displace):
        alpha = complex(gate.alpha)
        k = alpha * ad - np.conj(alpha) * a  # anti-Hermitian
        return DenseOperator(_expm_from_hermitian_exponent(1j * k), cutoffs)

    if isinstance(gate, Squeeze):
        z = gate.r * np.exp(1j * gate.phi)
        k = (np.conj(z) * (a @ a) - z * (ad @ ad)) / 2.0
        return DenseOperator(_expm_from_hermitian_exponent(1j * k), cutoffs)

    if isinstance(gate, Trisqueeze):
        a3 = a @ a @ a
        h = gate.r * (np.exp(1j * gate.phi) * a3.conj().T + np.exp(-1j * gate.phi) * a3)
        return DenseOperator(_expm_from_hermitian_exponent(h), cutoffs)

    n1 = cutoffs[1]
    b = ladder(n1, "annihilate").entries
    a_full = np.kron(a, np.eye(n1))
    b_full = np.kron(np.eye(n0), b)

    if isinstance(gate, BeamSplitter):
        h = gate.theta * (
            np.exp(1j * gate.phi) * (a_full @ b_full.conj().T)
            + np.exp(-1j * gate.phi) * (a_full.conj().T @ b_full)
        )
        return DenseOperator(_expm_from_hermitian_exponent(h), cutoffs)

    if isinstance(gate, TwoModeSqueeze):
        h = -gate.r * (
            np.exp(1j * gate.phi) * (a_full @ b_full)
            + np.exp(-1j * gate.phi) * (a_full.conj().T @ b_full.conj().T)
        )
        return DenseOperator(_expm_from_hermitian_exponent(h), cutoffs)

    raise TypeError(f"unknown gate spec {gate!r}")
