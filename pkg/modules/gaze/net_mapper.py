# =============================================================================
# GAZE MODULE - Network Axis Mapper
# File: modules/gaze/net_mapper.py
# =============================================================================

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import logging
import torch
from torch import nn

from ..core.errors import NonFiniteLoss, RankDeficient
from .calibration import CalibrationSet

logger = logging.getLogger(__name__)

ACTIVATIONS = {
    'tanh': nn.Tanh,
    'relu': nn.ReLU,
    'softplus': nn.Softplus,
    'gelu': nn.GELU,
}

MIN_NET_PAIRS = 9


@dataclass(frozen=True)
class NetTrainingConfig:
    hidden_widths: Tuple[int, ...] = (96, 96, 96, 96)
    activation: str = 'tanh'
    optimizer: str = 'adam'
    iterations: int = 1500
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation {self.activation!r}")
        if self.optimizer not in ('adam', 'sgd'):
            raise ValueError(f"Unknown optimizer {self.optimizer!r}")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))

    @classmethod
    def from_config(cls, config):
        return cls(
            hidden_widths=tuple(config.get('mapper.hidden_widths', [96, 96, 96, 96])),
            activation=config.get('mapper.activation', 'tanh'),
            optimizer=config.get('mapper.optimizer', 'adam'),
            iterations=int(config.get('mapper.iterations', 1500)),
            learning_rate=float(config.get('mapper.learning_rate', 1e-3)),
            momentum=float(config.get('mapper.momentum', 0.9)),
            seed=int(config.get('mapper.seed', 0)),
        )


class GazeMapperNet(nn.Module):
    """Fully-connected residual map on unit vectors: normalize(x + f(x))"""

    def __init__(self, hidden_widths=(96, 96, 96, 96), activation='tanh'):
        super().__init__()
        widths = [3, *hidden_widths, 3]
        layers = []
        for i in range(len(widths) - 1):
            layers.append(nn.Linear(widths[i], widths[i + 1], dtype=torch.float64))
            if i < len(widths) - 2:
                layers.append(ACTIVATIONS[activation]())
        self.body = nn.Sequential(*layers)

    def linear_layers(self):
        return [m for m in self.body if isinstance(m, nn.Linear)]

    def reset_parameters(self, generator: torch.Generator):
        """Uniform fan-in init from the generator; last layer zero so the untrained net is the identity"""
        layers = self.linear_layers()
        with torch.no_grad():
            for layer in layers[:-1]:
                bound = 1.0 / np.sqrt(layer.in_features)
                for p in (layer.weight, layer.bias):
                    p.copy_((torch.rand(p.shape, generator=generator, dtype=torch.float64) * 2.0 - 1.0) * bound)
            layers[-1].weight.zero_()
            layers[-1].bias.zero_()

    def forward(self, x):
        y = x + self.body(x)
        return y / torch.linalg.vector_norm(y, dim=-1, keepdim=True)


def cosine_loss(predicted, target):
    return torch.mean(1.0 - torch.sum(predicted * target, dim=-1))


@dataclass(eq=False)
class NetMapper:
    network: GazeMapperNet
    config: NetTrainingConfig = field(default_factory=NetTrainingConfig)
    final_loss: float = float('nan')
    loss_history: List[float] = field(default_factory=list)
    kind = "network"

    @property
    def parameter_count(self):
        return sum(p.numel() for p in self.network.parameters())

    def map_many(self, directions):
        x = torch.as_tensor(np.asarray(directions, dtype=np.float64).reshape(-1, 3))
        with torch.no_grad():
            return self.network(x).numpy().copy()

    def map(self, direction):
        return self.map_many(direction)[0]

    def flat_parameters(self):
        return torch.nn.utils.parameters_to_vector(self.network.parameters()).detach().numpy().copy()

    def set_flat_parameters(self, flat):
        torch.nn.utils.vector_to_parameters(torch.tensor(np.asarray(flat, dtype=np.float64)),
                                            self.network.parameters())

    def loss_at(self, flat, calib: CalibrationSet):
        self.set_flat_parameters(flat)
        with torch.no_grad():
            return float(cosine_loss(self.network(torch.as_tensor(calib.optical)), torch.as_tensor(calib.visual)))

    def gradient_at(self, flat, calib: CalibrationSet):
        """Autograd gradient of the cosine loss w.r.t. the flat parameter vector"""
        self.set_flat_parameters(flat)
        self.network.zero_grad()
        loss = cosine_loss(self.network(torch.as_tensor(calib.optical)), torch.as_tensor(calib.visual))
        loss.backward()
        return torch.cat([p.grad.reshape(-1) for p in self.network.parameters()]).numpy().copy()

    def to_dict(self):
        return {
            "config": {**self.config.__dict__, "hidden_widths": list(self.config.hidden_widths)},
            "final_loss": self.final_loss,
            "parameters": {name: t.detach().numpy().tolist() for name, t in self.network.state_dict().items()},
        }

    @classmethod
    def from_dict(cls, data):
        config = NetTrainingConfig(**data["config"])
        network = GazeMapperNet(config.hidden_widths, config.activation)
        state = {name: torch.tensor(values, dtype=torch.float64) for name, values in data["parameters"].items()}
        network.load_state_dict(state)
        return cls(network, config, float(data.get("final_loss", float('nan'))))


def build_net_mapper(config: NetTrainingConfig = None) -> NetMapper:
    config = config or NetTrainingConfig()
    network = GazeMapperNet(config.hidden_widths, config.activation)
    network.reset_parameters(torch.Generator().manual_seed(config.seed))
    return NetMapper(network, config)


def fit_net_mapper(calib: CalibrationSet, config: NetTrainingConfig = None) -> NetMapper:
    """Full-batch first-order training of the cosine loss for a fixed number of iterations"""
    config = config or NetTrainingConfig()
    if len(calib) < MIN_NET_PAIRS:
        raise RankDeficient(f"Network mapper needs {MIN_NET_PAIRS} or more calibration pairs, got {len(calib)}")

    mapper = build_net_mapper(config)
    network = mapper.network
    if config.optimizer == 'adam':
        optimizer = torch.optim.Adam(network.parameters(), lr=config.learning_rate)
    else:
        optimizer = torch.optim.SGD(network.parameters(), lr=config.learning_rate, momentum=config.momentum)

    x = torch.as_tensor(calib.optical)
    y = torch.as_tensor(calib.visual)
    loss_value = float('nan')
    for iteration in range(config.iterations):
        optimizer.zero_grad()
        loss = cosine_loss(network(x), y)
        loss_value = float(loss)
        if not np.isfinite(loss_value):
            raise NonFiniteLoss(iteration, loss_value)
        loss.backward()
        optimizer.step()
        if iteration % 100 == 0:
            mapper.loss_history.append(loss_value)
            logger.debug(f"Mapper iteration {iteration}: loss {loss_value:.3e}")

    with torch.no_grad():
        mapper.final_loss = float(cosine_loss(network(x), y))
    if not np.isfinite(mapper.final_loss):
        raise NonFiniteLoss(config.iterations, mapper.final_loss)
    logger.info(f"Network mapper trained on {len(calib)} pairs: final loss {mapper.final_loss:.3e}")
    return mapper
