"""
Feedforward networks for coefficient regression and Markovian quota policies
Networks are float64 torch modules trained with ADAM
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn
from tqdm import tqdm

from exceptions import TrainingDivergedError, UnsupportedModeError
from policies import QuotaPolicy, as_batch
from sde_core import ModelParams, n_steps

logger = logging.getLogger(__name__)

DTYPE = torch.float64


@dataclass
class TrainConfig:
    """Optimizer settings shared by both trainers"""

    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    steps_per_epoch: int = 1
    log_every: int = 20
    progress: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")


@dataclass
class TrainingHistory:
    epochs: List[int] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)

    def record(self, epoch: int, loss: float):
        self.epochs.append(epoch)
        self.losses.append(loss)

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


class Mlp(nn.Module):
    """Rectifier network X^{k+1} = max(A^k X^k + b^k, 0), identity output layer

    Optional affine standardisation of inputs and outputs is stored in buffers
    and applied inside ``forward``; the clamp, when set, is applied last.
    """

    def __init__(self, sizes: Sequence[int], clamp: Optional[Tuple[float, float]] = None, seed: int = 0):
        super().__init__()
        if len(sizes) < 2:
            raise ValueError(f"An MLP needs at least input and output sizes, got {list(sizes)}")
        self.sizes = [int(s) for s in sizes]
        self.clamp = None if clamp is None else (float(clamp[0]), float(clamp[1]))
        self.layers = nn.ModuleList(
            nn.Linear(a, b, dtype=DTYPE) for a, b in zip(self.sizes[:-1], self.sizes[1:])
        )
        self.register_buffer("in_shift", torch.zeros(self.sizes[0], dtype=DTYPE))
        self.register_buffer("in_scale", torch.ones(self.sizes[0], dtype=DTYPE))
        self.register_buffer("out_shift", torch.zeros(self.sizes[-1], dtype=DTYPE))
        self.register_buffer("out_scale", torch.ones(self.sizes[-1], dtype=DTYPE))
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int):
        # He-uniform weights, zero biases, drawn from numpy so the seed fully defines the net
        rng = np.random.default_rng(seed)
        with torch.no_grad():
            for layer in self.layers:
                bound = math.sqrt(6.0 / layer.in_features)
                w = rng.uniform(-bound, bound, size=(layer.out_features, layer.in_features))
                layer.weight.copy_(torch.from_numpy(w))
                layer.bias.zero_()

    def set_normalization(self, in_shift=None, in_scale=None, out_shift=None, out_scale=None):
        with torch.no_grad():
            for name, value in (("in_shift", in_shift), ("in_scale", in_scale),
                                ("out_shift", out_shift), ("out_scale", out_scale)):
                if value is not None:
                    buf = getattr(self, name)
                    buf.copy_(torch.as_tensor(np.broadcast_to(value, buf.shape).copy(), dtype=DTYPE))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = (x - self.in_shift) / self.in_scale
        for layer in self.layers[:-1]:
            h = torch.relu(layer(h))
        y = self.layers[-1](h) * self.out_scale + self.out_shift
        if self.clamp is not None:
            # hard clamp: gradient 1 inside the box, 0 outside
            y = torch.clamp(y, self.clamp[0], self.clamp[1])
        return y

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    @property
    def output_size(self) -> int:
        return self.sizes[-1]


def _as_input(net: Mlp, x) -> Tuple[torch.Tensor, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != net.input_size:
        raise ValueError(f"Network expects inputs of size {net.input_size}, got {arr.shape[1]}")
    return torch.from_numpy(arr.copy()), single


def mlp_eval(net: Mlp, x) -> np.ndarray:
    """Deterministic forward pass on a vector or an (n, input) batch"""
    tensor, single = _as_input(net, x)
    with torch.no_grad():
        out = net(tensor).numpy()
    return out[0] if single else out


def squared_error(outputs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    return ((outputs - targets) ** 2).sum(dim=1)


def mlp_gradient(net: Mlp, inputs, targets=None,
                 loss_fn: Optional[Callable[[torch.Tensor], torch.Tensor]] = None) -> List[np.ndarray]:
    """Reverse-mode gradient of the summed per-sample loss w.r.t. [A^0, b^0, A^1, b^1, ...]

    ``loss_fn`` maps the (n, out) outputs to n per-sample losses; by default
    the squared error against ``targets`` is used.
    """
    x, _ = _as_input(net, inputs)
    out = net(x)
    if loss_fn is None:
        if targets is None:
            raise ValueError("mlp_gradient needs targets or a loss function")
        t = torch.as_tensor(np.atleast_2d(np.asarray(targets, dtype=float)), dtype=DTYPE)
        if t.shape != out.shape:
            raise ValueError(f"Targets shape {tuple(t.shape)} does not match outputs {tuple(out.shape)}")
        per_sample = squared_error(out, t)
    else:
        per_sample = loss_fn(out)
    params = [p for layer in net.layers for p in (layer.weight, layer.bias)]
    grads = torch.autograd.grad(per_sample.sum(), params, allow_unused=True)
    return [np.zeros(p.shape) if g is None else g.detach().numpy().copy() for p, g in zip(params, grads)]


def parameter_arrays(net: Mlp) -> List[np.ndarray]:
    return [p.detach().numpy().copy() for layer in net.layers for p in (layer.weight, layer.bias)]


def _adam(net: Mlp, config: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(net.parameters(), lr=config.learning_rate,
                            betas=(config.beta1, config.beta2), eps=config.eps)


def _check_finite(loss: float, epoch: int):
    if not math.isfinite(loss):
        raise TrainingDivergedError(epoch - 1)


def train_regressor(Z: np.ndarray, z: np.ndarray, hidden: Sequence[int] = (100, 100),
                    config: Optional[TrainConfig] = None) -> Tuple[Mlp, TrainingHistory]:
    """Fit z = f(Z) on a synthetic dataset with a least-squares loss

    Inputs and targets are standardised with the dataset moments; the loss is
    the mean squared error of the standardised targets.
    """
    config = config or TrainConfig()
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if Z.shape[0] == 0:
        raise ValueError("Training set is empty")
    if Z.shape[0] != z.shape[0]:
        raise ValueError(f"Got {Z.shape[0]} inputs and {z.shape[0]} targets")

    net = Mlp([Z.shape[1], *hidden, z.shape[1]], seed=config.seed)
    z_scale = np.where(z.std(axis=0) > 0, z.std(axis=0), 1.0)
    net.set_normalization(
        in_shift=Z.mean(axis=0),
        in_scale=np.where(Z.std(axis=0) > 0, Z.std(axis=0), 1.0),
        out_shift=z.mean(axis=0),
        out_scale=z_scale,
    )
    X = torch.from_numpy(Z.copy())
    Y = torch.from_numpy(z.copy())
    weights = torch.from_numpy(1.0 / z_scale ** 2)
    optimizer = _adam(net, config)
    rng = np.random.default_rng(config.seed)
    history = TrainingHistory()

    epochs = range(1, config.epochs + 1)
    for epoch in tqdm(epochs, desc="regressor", disable=not config.progress):
        order = rng.permutation(Z.shape[0])
        for start in range(0, len(order), config.batch_size):
            idx = torch.from_numpy(order[start:start + config.batch_size])
            optimizer.zero_grad()
            loss = (((net(X[idx]) - Y[idx]) ** 2) * weights).sum(dim=1).mean()
            loss.backward()
            optimizer.step()
        with torch.no_grad():
            epoch_loss = float((((net(X) - Y) ** 2) * weights).sum(dim=1).mean())
        _check_finite(epoch_loss, epoch)
        history.record(epoch, epoch_loss)
        if epoch % config.log_every == 0:
            logger.info(f"Regressor epoch {epoch}/{config.epochs}: loss {epoch_loss:.3e}")
    return net, history


class NeuralPolicy(QuotaPolicy):
    """Static Markovian quota u(B) represented by a clamped MLP"""

    kind = "neural"
    differentiable = True

    def __init__(self, net: Mlp, u_min: float, u_max: float):
        super().__init__(u_min, u_max)
        self.net = net

    def raw(self, B: np.ndarray, t: float) -> np.ndarray:
        return mlp_eval(self.net, B)

    def gradient(self, B, t: float = 0.0) -> np.ndarray:
        x = torch.from_numpy(as_batch(B).copy()).requires_grad_(True)
        y = self.net(x)
        rows = [torch.autograd.grad(y[:, j].sum(), x, retain_graph=True)[0]
                for j in range(y.shape[1])]
        return torch.stack(rows, dim=1).detach().numpy()


def _rollout_loss(net: Mlp, params: ModelParams, dt: float, normals: np.ndarray) -> torch.Tensor:
    """Pathwise objective of a batch, differentiable through the unrolled scheme"""
    d = params.d
    N = normals.shape[1] - 1
    noise = torch.from_numpy(normals)
    r = torch.from_numpy(params.r)
    kappa = torch.from_numpy(params.kappa)
    target = torch.from_numpy(params.B_desired)
    alpha = torch.from_numpy(params.alpha)
    beta = torch.from_numpy(params.beta)
    sig = params.sigma
    sqdt = math.sqrt(dt)

    B = torch.clamp(torch.from_numpy(params.B0) + params.sigma_init * noise[:, 0, :d], min=0.0)
    cost = torch.zeros(normals.shape[0], dtype=DTYPE)
    u_prev = None
    for k in range(N + 1):
        u = net(B)
        if u_prev is not None:
            cost = cost + (((u - u_prev) ** 2) * beta).sum(dim=1)
        u_prev = u
        if k == N:
            break
        cost = cost + dt * (params.tracking_weight * ((B - target) ** 2).sum(dim=1) - (u * alpha).sum(dim=1))
        growth = r - B @ kappa.T - u
        dW = sqdt * (noise[:, k + 1, :1] if params.noise == "common" else noise[:, k + 1, :d])
        if params.scheme == "log":
            B = B * torch.exp((growth - 0.5 * sig ** 2) * dt + sig * dW)
        else:
            B = torch.clamp(B + B * growth * dt + sig * B * dW, min=0.0)
    return cost.mean()


def train_policy(params: ModelParams, hidden: Sequence[int] = (50, 50), dt: float = 0.01,
                 config: Optional[TrainConfig] = None) -> Tuple[NeuralPolicy, TrainingHistory]:
    """Train a static policy u(B) by pathwise stochastic gradient on the quota objective

    Each optimizer step draws a fresh batch of noise, unrolls the biomass
    scheme with u = net(B_t) and backpropagates through the whole path.
    """
    config = config or TrainConfig()
    if params.dynamics != "reduced":
        raise UnsupportedModeError("Policy training uses the reduced biomass dynamics")
    N = n_steps(params.T, dt)
    net = Mlp([params.d, *hidden, params.d], clamp=(params.u_min, params.u_max), seed=config.seed)
    lo = params.u_min if np.isfinite(params.u_min) else 0.0
    hi = params.u_max if np.isfinite(params.u_max) else lo + 1.0
    net.set_normalization(in_shift=params.B0, out_shift=0.5 * (lo + hi), out_scale=0.25 * (hi - lo))
    optimizer = _adam(net, config)
    history = TrainingHistory()

    for epoch in tqdm(range(1, config.epochs + 1), desc="policy", disable=not config.progress):
        total = 0.0
        for step in range(config.steps_per_epoch):
            seq = np.random.SeedSequence(config.seed, spawn_key=(epoch, step))
            normals = np.random.default_rng(seq).standard_normal((config.batch_size, N + 1, params.d + 1))
            optimizer.zero_grad()
            loss = _rollout_loss(net, params, dt, normals)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
        epoch_loss = total / config.steps_per_epoch
        _check_finite(epoch_loss, epoch)
        history.record(epoch, epoch_loss)
        if epoch % config.log_every == 0:
            logger.info(f"Policy epoch {epoch}/{config.epochs}: loss {epoch_loss:.5f}")
    return NeuralPolicy(net, params.u_min, params.u_max), history


def save_weights(net: Mlp, path: Path):
    """Flat text format: sizes line, clamp line, normalisation lines, one block per layer"""
    fmt = lambda values: " ".join(f"{v:.17g}" for v in np.ravel(values))
    lines = [" ".join(str(s) for s in net.sizes)]
    lines.append("clamp none" if net.clamp is None else f"clamp {net.clamp[0]:.17g} {net.clamp[1]:.17g}")
    for name in ("in_shift", "in_scale", "out_shift", "out_scale"):
        lines.append(f"{name} {fmt(getattr(net, name).numpy())}")
    for layer in net.layers:
        lines.append("")
        for row in layer.weight.detach().numpy():
            lines.append(fmt(row))
        lines.append(fmt(layer.bias.detach().numpy()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_weights(path: Path) -> Mlp:
    lines = Path(path).read_text().splitlines()
    sizes = [int(s) for s in lines[0].split()]
    clamp_tokens = lines[1].split()[1:]
    clamp = None if clamp_tokens == ["none"] else (float(clamp_tokens[0]), float(clamp_tokens[1]))
    net = Mlp(sizes, clamp=clamp)
    norms = {}
    for line in lines[2:6]:
        name, *values = line.split()
        norms[name] = np.array([float(v) for v in values])
    net.set_normalization(**norms)
    rows = [line for line in lines[6:] if line.strip()]
    cursor = 0
    with torch.no_grad():
        for layer in net.layers:
            w = np.array([[float(v) for v in rows[cursor + i].split()] for i in range(layer.out_features)])
            cursor += layer.out_features
            b = np.array([float(v) for v in rows[cursor].split()])
            cursor += 1
            layer.weight.copy_(torch.from_numpy(w))
            layer.bias.copy_(torch.from_numpy(b))
    return net
