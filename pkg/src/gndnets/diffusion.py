"""Diffusion coefficient schedules and the three learnable aggregators.

A fixed schedule assigns one scalar weight per hop. The learnable variants
replace those weights: a single coefficient row (slp), a two-layer network
applied independently at every (vertex, feature) position across the hop
axis (mlp), or an explicit forward-Euler evolution that repeatedly subtracts
a smoothed correction (ds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Node, Parameter, Tape, glorot_init
from .errors import InvalidParameter
from .graph import HopSequence, SparseMatrix


@dataclass(frozen=True)
class DiffusionSchedule:
    """Truncated fixed schedule: kind is "ppr" or "heat"."""

    kind: str
    K: int
    gamma: float = 0.1
    t: float = 3.0


def schedule_coefficients(s: DiffusionSchedule) -> np.ndarray:
    """Coefficients alpha_0..alpha_{K-1} of the truncated expansion.

    ppr:  alpha_k = (1 - gamma) * gamma^k, summing to 1 - gamma^K.
    heat: alpha_k = exp(-t) * t^k / k!, a partial Poisson sum.
    """
    if s.K < 1:
        raise InvalidParameter(f"K must be at least 1, got {s.K}")
    if s.kind == "ppr":
        if not 0.0 < s.gamma < 1.0:
            raise InvalidParameter(f"ppr needs 0 < gamma < 1, got {s.gamma}")
        return (1.0 - s.gamma) * s.gamma ** np.arange(s.K, dtype=np.float64)
    if s.kind == "heat":
        if s.t <= 0.0:
            raise InvalidParameter(f"heat needs t > 0, got {s.t}")
        k = np.arange(s.K)
        log_terms = -s.t + k * math.log(s.t) - np.array([math.lgamma(i + 1.0) for i in k])
        return np.exp(log_terms)
    raise InvalidParameter(f"unknown schedule kind {s.kind!r}")


def fixed_diffuse(hops: HopSequence, s: DiffusionSchedule, renormalize=False) -> np.ndarray:
    """sum_k alpha_k * hops[k]; linear in the input, no activation.

    With renormalize=True the truncated coefficients are rescaled to sum
    to one, compensating the mass lost to truncation.
    """
    if s.K != hops.K:
        raise InvalidParameter(f"schedule has K={s.K} but {hops.K} hops were given")
    coeffs = schedule_coefficients(s)
    if renormalize:
        coeffs = coeffs / coeffs.sum()
    out = coeffs[0] * hops.hops[0]
    for k in range(1, hops.K):
        out = out + coeffs[k] * hops.hops[k]
    return out


class SlpDiffusion:
    """One learnable coefficient per hop, initialized uniformly at 1/K."""

    def __init__(self, K: int):
        if K < 1:
            raise InvalidParameter("K must be at least 1")
        self.alpha = Parameter(np.full((1, K), 1.0 / K), name="alpha")


class MlpDiffusion:
    """Two-layer network over the hop axis, shared across all positions.

    layer1 is K x hidden with a ReLU behind it; layer2 is hidden x 1 with no
    activation of its own.
    """

    def __init__(self, K: int, hidden: int, rng: np.random.Generator):
        if K < 1 or hidden < 1:
            raise InvalidParameter("K and hidden width must be at least 1")
        self.layer1 = Parameter(glorot_init(K, hidden, rng), name="mlp_layer1")
        self.layer2 = Parameter(glorot_init(hidden, 1, rng), name="mlp_layer2")


class DsDiffusion:
    """Correction network for the explicit evolution; ReLU after each layer."""

    def __init__(self, width: int, hidden: int, rng: np.random.Generator):
        if width < 1 or hidden < 1:
            raise InvalidParameter("widths must be at least 1")
        self.layer1 = Parameter(glorot_init(width, hidden, rng), name="ds_layer1")
        self.layer2 = Parameter(glorot_init(hidden, width, rng), name="ds_layer2")


def taped_hops(tape: Tape, w: SparseMatrix, z: Node, k: int) -> list[Node]:
    """Differentiable hop sequence [Z, WZ, ..., W^(k-1) Z] on the tape."""
    if k < 1:
        raise InvalidParameter("hop count must be at least 1")
    hops = [z]
    for _ in range(k - 1):
        hops.append(tape.spmm_const(w, hops[-1]))
    return hops


def slp_aggregate(tape: Tape, hops: list[Node], slp: SlpDiffusion) -> Node:
    """ReLU of the learned weighted sum of the hops."""
    alpha = tape.parameter(slp.alpha)
    return tape.relu(tape.scale_by_parameter_row(alpha, hops))


def mlp_aggregate(tape: Tape, hops: list[Node], mlp: MlpDiffusion) -> Node:
    """Apply the hop-axis network at every (vertex, feature) position.

    Equivalent to flattening each hop matrix into a row, stacking the K rows,
    and running each column (one per position) through the network; a single
    ReLU follows the unflattened result.
    """
    n, r = hops[0].value.shape
    flat = [tape.flatten_rows(h) for h in hops]
    stacked = tape.concat_rows(flat)  # K x (n*r)
    positions = tape.transpose(stacked)  # (n*r) x K
    hidden = tape.relu(tape.matmul(positions, tape.parameter(mlp.layer1)))
    collapsed = tape.matmul(hidden, tape.parameter(mlp.layer2))  # (n*r) x 1
    row = tape.transpose(collapsed)
    return tape.relu(tape.unflatten_rows(row, n, r))


def ds_evolve(tape: Tape, z: Node, w: SparseMatrix, ds: DsDiffusion, K: int, T: int) -> Node:
    """T explicit steps of H <- H - W^K * net(H), starting from H = Z.

    W^K is applied as K successive sparse products; the power is never
    materialized.
    """
    if K < 1:
        raise InvalidParameter("K must be at least 1")
    if T < 0:
        raise InvalidParameter("T must be non-negative")
    h = z
    for _ in range(T):
        a1 = tape.relu(tape.matmul(h, tape.parameter(ds.layer1)))
        correction = tape.relu(tape.matmul(a1, tape.parameter(ds.layer2)))
        for _ in range(K):
            correction = tape.spmm_const(w, correction)
        h = tape.subtract(h, correction)
    return h
