"""Continuous-variable quantum neural network on a single motional mode.

A layer applies Phase(theta) -> Squeeze(beta) -> Phase(phi) -> Displace(alpha)
-> Kerr(tau); classical data is encoded by displacing the vacuum and the
network output is the expectation of the X quadrature.  Training uses Adam on
central finite-difference gradients.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from . import fock, gates, ion
from .evolve import propagate_const
from .fock import FockVector, LayoutMismatchError

LAYER_PARAM_NAMES = ("theta", "beta_r", "beta_phi", "phi", "alpha_re", "alpha_im", "tau")
LEAKAGE_WARN_THRESHOLD = 1e-3


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training; carries the iteration index."""

    def __init__(self, iteration: int):
        self.iteration = iteration
        super().__init__(f"loss diverged (non-finite) at iteration {iteration}")


class LeakageWarning(UserWarning):
    """Population near the Fock cutoff crossed the reporting threshold."""


@dataclass(frozen=True)
class QnnLayerParams:
    """Seven real parameters of one network layer."""

    theta: float
    beta_r: float
    beta_phi: float
    phi: float
    alpha_re: float
    alpha_im: float
    tau: float

    def __post_init__(self):
        vals = [getattr(self, name) for name in LAYER_PARAM_NAMES]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite layer parameters {vals}")

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in LAYER_PARAM_NAMES], dtype=float)

    @staticmethod
    def from_vector(v) -> "QnnLayerParams":
        v = np.asarray(v, dtype=float)
        if v.shape != (7,):
            raise ValueError(f"expected 7 parameters, got shape {v.shape}")
        return QnnLayerParams(*v)


@dataclass(frozen=True)
class QnnModel:
    """Ordered layers on a single truncated mode with a fixed readout."""

    layers: tuple[QnnLayerParams, ...]
    cutoff: int
    mode_count: int = 1
    readout: str = "expectation_X"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("need at least one layer")
        if self.cutoff < 2:
            raise ValueError(f"cutoff {self.cutoff} < 2")
        if self.mode_count != 1:
            raise ValueError("only single-mode networks are supported")
        if self.readout not in ("expectation_X", "state"):
            raise ValueError(f"unknown readout {self.readout!r}")

    def param_vector(self) -> np.ndarray:
        return np.concatenate([layer.as_vector() for layer in self.layers])

    def with_params(self, v) -> "QnnModel":
        v = np.asarray(v, dtype=float)
        if v.size != 7 * len(self.layers):
            raise ValueError(f"expected {7 * len(self.layers)} parameters, got {v.size}")
        layers = tuple(
            QnnLayerParams.from_vector(v[7 * i: 7 * (i + 1)]) for i in range(len(self.layers))
        )
        return replace(self, layers=layers)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_iters: int = 2000
    fd_step: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1, beta2 must lie in [0, 1)")


def encode(x: float, cutoff: int) -> FockVector:
    """Feature map: displace the vacuum by the (real) input value."""
    return fock.coherent(x, cutoff)


def _layer_gates(layer: QnnLayerParams) -> list[ion.GateSpec]:
    # negative squeeze magnitude folds into the squeeze phase: S(-r, p) = S(r, p + pi)
    r, p = layer.beta_r, layer.beta_phi
    if r < 0:
        r, p = -r, p + math.pi
    return [
        ion.Phase(layer.theta),
        ion.Squeeze(r, p),
        ion.Phase(layer.phi),
        ion.Displace(complex(layer.alpha_re, layer.alpha_im)),
        ion.Kerr(layer.tau),
    ]


@lru_cache(maxsize=8)
def _mode_ops(cutoff: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = fock.ladder(cutoff, "annihilate").entries
    n = np.arange(cutoff, dtype=float)
    return a, a.conj().T, n


def layer_unitary(layer: QnnLayerParams, cutoff: int) -> np.ndarray:
    """Product of the five ideal gate unitaries of one layer.

    Built directly (diagonal phases, eigh exponentials) rather than through
    gates.ideal_unitary; equality with the gate module is covered by tests.
    """
    a, ad, n = _mode_ops(cutoff)
    r, p = layer.beta_r, layer.beta_phi
    if r < 0:
        r, p = -r, p + math.pi
    u = np.diag(np.exp(-1j * layer.theta * n)).astype(np.complex128)
    if r != 0.0:
        z = r * cmath.exp(1j * p)
        w, v = np.linalg.eigh(1j * (np.conj(z) * (a @ a) - z * (ad @ ad)) / 2.0)
        u = (v * np.exp(-1j * w)) @ (v.conj().T @ u)
    u = np.exp(-1j * layer.phi * n)[:, None] * u
    alpha = complex(layer.alpha_re, layer.alpha_im)
    if alpha != 0.0:
        w, v = np.linalg.eigh(1j * (alpha * ad - np.conj(alpha) * a))
        u = (v * np.exp(-1j * w)) @ (v.conj().T @ u)
    u = np.exp(1j * layer.tau * n * (n - 1) / 2.0)[:, None] * u
    return u


def _apply_layer_physical(layer: QnnLayerParams, state: FockVector, config: ion.IonConfig) -> FockVector:
    """One layer via effective-Hamiltonian evolutions with the spin kept explicit."""
    cutoff = state.layout[0]
    full = fock.tensor(fock.spin_plus_state(), state)
    for gate in _layer_gates(layer):
        t_gate, _ = ion.gate_time_and_drive(gate, config)
        if t_gate == 0.0:
            continue
        h_eff = ion.effective_hamiltonian(gate, config, (cutoff,))
        full = propagate_const(h_eff, t_gate, full)
    # |+> is an exact eigenstate of every effective H, so this projection is lossless
    amps = full.amplitudes.reshape(2, cutoff)
    reduced = (amps[0] + amps[1]) / math.sqrt(2.0)
    return FockVector(reduced, (cutoff,))


def forward(
    model: QnnModel,
    state: FockVector,
    mode: str = "ideal",
    ion_config: ion.IonConfig | None = None,
) -> FockVector:
    """Run the network on a mode state; mode is "ideal" or "physical"."""
    if state.layout != (model.cutoff,):
        raise LayoutMismatchError(f"state layout {state.layout} != ({model.cutoff},)")
    if mode not in ("ideal", "physical"):
        raise ValueError(f"unknown forward mode {mode!r}")
    if mode == "physical" and ion_config is None:
        raise ValueError("physical mode requires an ion_config")
    for i, layer in enumerate(model.layers):
        if mode == "ideal":
            state = FockVector(layer_unitary(layer, model.cutoff) @ state.amplitudes, state.layout)
        else:
            state = _apply_layer_physical(layer, state, ion_config)
        k = max(1, math.ceil(0.1 * model.cutoff))
        leak = float(np.sum(np.abs(state.amplitudes[-k:]) ** 2))
        if leak > LEAKAGE_WARN_THRESHOLD:
            warnings.warn(
                f"layer {i}: population {leak:.2e} in top {k} Fock levels", LeakageWarning
            )
    return state


def predict(
    model: QnnModel,
    x: float,
    mode: str = "ideal",
    ion_config: ion.IonConfig | None = None,
) -> float:
    """Network output <X> for a scalar input."""
    out = forward(model, encode(x, model.cutoff), mode, ion_config)
    xop = fock.quadrature(model.cutoff, "X").entries
    return float(np.real(np.vdot(out.amplitudes, xop @ out.amplitudes)))


def mse_loss(preds, targets) -> float:
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch {preds.shape} vs {targets.shape}")
    return float(np.mean((preds - targets) ** 2))


def fidelity_loss(state: FockVector, target: FockVector) -> float:
    """(1 - F)^2 against a pure target."""
    f = abs(np.vdot(state.amplitudes, target.amplitudes)) ** 2
    return float((1.0 - f) ** 2)


def grad_fd(loss_at: Callable[[np.ndarray], float], params: np.ndarray, fd_step: float) -> np.ndarray:
    """Central finite-difference gradient of a scalar loss."""
    params = np.asarray(params, dtype=float)
    grad = np.empty_like(params)
    for i in range(params.size):
        bump = np.zeros_like(params)
        bump[i] = fd_step
        hi = loss_at(params + bump)
        lo = loss_at(params - bump)
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise ValueError(f"non-finite loss at coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * fd_step)
    return grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(np.zeros(n), np.zeros(n), 0)


def adam_step(
    params: np.ndarray, grads: np.ndarray, state: AdamState, cfg: TrainConfig
) -> tuple[np.ndarray, AdamState]:
    """Standard bias-corrected Adam update."""
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads**2
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new_params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return new_params, AdamState(m, v, t)


def init_layers(n_layers: int, rng: np.random.Generator) -> tuple[QnnLayerParams, ...]:
    """Uniform random initialization kept low-energy for honest truncation."""
    layers = []
    for _ in range(n_layers):
        layers.append(
            QnnLayerParams(
                theta=rng.uniform(-math.pi, math.pi),
                beta_r=rng.uniform(0.0, 0.2),
                beta_phi=rng.uniform(-math.pi, math.pi),
                phi=rng.uniform(-math.pi, math.pi),
                alpha_re=rng.uniform(-0.5, 0.5),
                alpha_im=rng.uniform(-0.5, 0.5),
                tau=rng.uniform(-0.2, 0.2),
            )
        )
    return tuple(layers)


class _LayerCache:
    """Fidelity/MSE losses with per-layer unitary caching for FD gradients.

    A parameter bump touches exactly one layer, so the unchanged layer
    unitaries are reused and only one layer matrix is rebuilt per evaluation.
    """

    def __init__(self, model: QnnModel):
        self.model = model
        self.cutoff = model.cutoff
        self.n_layers = len(model.layers)

    def total_unitary(self, params: np.ndarray, cache: dict) -> np.ndarray:
        key_units = []
        for i in range(self.n_layers):
            chunk = params[7 * i: 7 * (i + 1)]
            key = (i, chunk.tobytes())
            if key not in cache:
                cache[key] = layer_unitary(QnnLayerParams.from_vector(chunk), self.cutoff)
            key_units.append(cache[key])
        u = key_units[0]
        for m in key_units[1:]:
            u = m @ u
        return u


def train(
    model: QnnModel,
    objective: Callable[[QnnModel], float] | None,
    cfg: TrainConfig,
    regression: tuple[np.ndarray, np.ndarray] | None = None,
    state_prep_target: FockVector | None = None,
    randomize_init: bool = False,
) -> tuple[QnnModel, list[float]]:
    """Minimize a loss with Adam over all layer parameters.

    Exactly one of `objective` (arbitrary callable), `regression`
    ((xs, ys) arrays, MSE on <X> outputs), or `state_prep_target`
    (pure state, loss (1-F)^2 from the vacuum) must be given.  With
    `randomize_init` the starting parameters are drawn from cfg.seed,
    making the whole run a deterministic function of the config.
    """
    chosen = [objective is not None, regression is not None, state_prep_target is not None]
    if sum(chosen) != 1:
        raise ValueError("specify exactly one objective")
    if randomize_init:
        rng = np.random.default_rng(cfg.seed)
        model = replace(model, layers=init_layers(len(model.layers), rng))
    cutoff = model.cutoff
    cache_helper = _LayerCache(model)
    unit_cache: dict = {}

    if regression is not None:
        xs, ys = regression
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        inputs = np.stack([encode(x, cutoff).amplitudes for x in xs], axis=1)
        xop = fock.quadrature(cutoff, "X").entries

        def loss_at(p: np.ndarray) -> float:
            u = cache_helper.total_unitary(p, unit_cache)
            outs = u @ inputs
            preds = np.real(np.einsum("ik,ij,jk->k", outs.conj(), xop, outs))
            return float(np.mean((preds - ys) ** 2))

    elif state_prep_target is not None:
        tgt = state_prep_target.amplitudes
        vac = fock.vacuum(cutoff).amplitudes

        def loss_at(p: np.ndarray) -> float:
            u = cache_helper.total_unitary(p, unit_cache)
            f = abs(np.vdot(tgt, u @ vac)) ** 2
            return float((1.0 - f) ** 2)

    else:

        def loss_at(p: np.ndarray) -> float:
            return float(objective(model.with_params(p)))

    params = model.param_vector()
    adam = AdamState.zeros(params.size)
    history: list[float] = []
    for it in range(cfg.max_iters):
        unit_cache.clear()
        loss = loss_at(params)
        if not math.isfinite(loss):
            raise TrainingDivergedError(it)
        history.append(loss)
        grads = grad_fd(loss_at, params, cfg.fd_step)
        params, adam = adam_step(params, grads, adam, cfg)
    final_loss = loss_at(params)
    if not math.isfinite(final_loss):
        raise TrainingDivergedError(cfg.max_iters)
    history.append(final_loss)
    return model.with_params(params), history
