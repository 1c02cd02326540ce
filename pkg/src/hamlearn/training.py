"""Full-batch gradient-descent training loops.

Plain constant-rate gradient descent, exactly one parameter update per step;
no momentum or adaptive scaling.  Chunked training runs the same loop over
successive windows of transition pairs, carrying weights forward between
stages.  All loops are deterministic functions of (network, corpus, config).
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field

from .errors import ConfigError, DivergenceError
from .neural import (
    DenseNetwork,
    Workspace,
    loss_param_gradient_from_stacked,
    stack_transitions,
)


@dataclass
class TrainConfig:
    learning_rate: float
    steps: int
    seed: int = 0
    chunk_size: int | None = None
    log_every: int = 1000
    loss_threshold: float | None = None  # stop a chunk schedule early below this
    max_stages: int | None = None  # cap on the number of chunk windows trained

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not self.steps > 0:
            raise ConfigError("steps must be positive")
        if self.chunk_size is not None and not self.chunk_size > 0:
            raise ConfigError("chunk_size must be positive")
        if not self.log_every > 0:
            raise ConfigError("log_every must be positive")


@dataclass
class TrainReport:
    loss_history: list = field(default_factory=list)  # (step, loss) pairs
    final_loss: float = float("nan")
    wall_time: float = 0.0
    stage_bounds: list = field(default_factory=list)  # (first_step, last_step) per stage


def _run_stage(net, Q, U, cfg, report, step_offset, quiet, ws=None):
    eta = cfg.learning_rate
    if ws is None or not ws.matches(net, Q.shape[0]):
        ws = Workspace(net, Q.shape[0])
    for k in range(cfg.steps):
        step = step_offset + k
        value, grad = loss_param_gradient_from_stacked(net, Q, U, ws)
        if not math.isfinite(value) or not grad.all_finite():
            raise DivergenceError(step, f"loss or gradient became non-finite at step {step}")
        if k % cfg.log_every == 0:
            report.loss_history.append((step, value))
            if not quiet:
                print(f"step {step} loss {value:.6e}", file=sys.stderr)
        for w, gw in zip(net.weights, grad.weights):
            w -= eta * gw
        for b, gb in zip(net.biases, grad.biases):
            b -= eta * gb
    return step_offset + cfg.steps


def train(
    net: DenseNetwork, corpus, cfg: TrainConfig, quiet: bool = False
) -> tuple[DenseNetwork, TrainReport]:
    """cfg.steps updates theta <- theta - lr * dL/dtheta on the full corpus."""
    t_start = time.perf_counter()
    Q, U = stack_transitions(corpus)
    net = net.copy()
    report = TrainReport()
    ws = Workspace(net, Q.shape[0])
    end = _run_stage(net, Q, U, cfg, report, 0, quiet, ws)
    final = loss_param_gradient_from_stacked(net, Q, U, ws)[0]
    report.loss_history.append((end, final))
    report.final_loss = final
    report.stage_bounds = [(0, end)]
    report.wall_time = time.perf_counter() - t_start
    return net, report


def train_chunked(
    net: DenseNetwork, corpus, cfg: TrainConfig, quiet: bool = False
) -> tuple[DenseNetwork, TrainReport]:
    """Train over successive windows of cfg.chunk_size transitions per trajectory.

    Weights carry forward between stages.  If cfg.loss_threshold is set, the
    schedule halts once a stage's final loss falls below it.
    """
    t_start = time.perf_counter()
    corpus = list(corpus)
    if cfg.chunk_size is None:
        raise ConfigError("train_chunked needs cfg.chunk_size")
    n = corpus[0].n_transitions if corpus else 0
    Q_all, U_all = stack_transitions(corpus)  # validates corpus consistency
    del Q_all, U_all
    c = cfg.chunk_size
    if n % c != 0:
        raise ConfigError(f"chunk_size {c} does not divide trajectory length {n}")
    n_stages = n // c
    if cfg.max_stages is not None:
        n_stages = min(n_stages, cfg.max_stages)
    net = net.copy()
    report = TrainReport()
    step = 0
    ws = None
    for stage in range(n_stages):
        Q, U = stack_transitions(corpus, start=stage * c, stop=(stage + 1) * c)
        if ws is None or not ws.matches(net, Q.shape[0]):
            ws = Workspace(net, Q.shape[0])
        stage_start = step
        step = _run_stage(net, Q, U, cfg, report, step, quiet, ws)
        stage_final = loss_param_gradient_from_stacked(net, Q, U, ws)[0]
        report.loss_history.append((step, stage_final))
        report.final_loss = stage_final
        report.stage_bounds.append((stage_start, step))
        if cfg.loss_threshold is not None and stage_final < cfg.loss_threshold:
            break
    report.wall_time = time.perf_counter() - t_start
    return net, report


def swap_activations(
    net: DenseNetwork, new_activations, new_output_transform: str
) -> DenseNetwork:
    """Same weights and biases, replaced activation tags and output transform."""
    new_activations = tuple(new_activations)
    if len(new_activations) != len(net.activations):
        raise ConfigError(
            f"need {len(net.activations)} activation tags, got {len(new_activations)}"
        )
    return DenseNetwork(
        net.layer_dims,
        [w.copy() for w in net.weights],
        [b.copy() for b in net.biases],
        new_activations,
        net.input_transform,
        new_output_transform,
    )
