"""Model variants built on the tape: learnable-diffusion networks plus
two-layer convolution, linear K-power, and fixed-schedule baselines.

Every variant exposes the same surface: build parameters from a config,
run forward to class probabilities, and attach a training loss to the tape.
Forward pipelines (eval mode drops out nothing):

  gnd_slp / gnd_mlp   Z = dropout(X) Theta; H = aggregate(hops of Z);
                      Y = softmax(dropout(H) Theta')
  gnd_ds              same, with H evolved from Z directly
  fixed_ppr / heat    the slp pipeline with coefficients frozen to a schedule
  gcn                 Y = softmax(S ReLU(S dropout(X) W0) W1), S symmetric
  sgc                 Y = softmax(W^K X Theta)
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .autodiff import Node, Parameter, Tape, glorot_init, softmax_rows
from .diffusion import (
    DiffusionSchedule,
    DsDiffusion,
    MlpDiffusion,
    SlpDiffusion,
    ds_evolve,
    mlp_aggregate,
    schedule_coefficients,
    slp_aggregate,
    taped_hops,
)
from .errors import EmptyMask, InvalidParameter
from .graph import Graph, SparseMatrix, add_self_loops, renormalized_smoothing, transition_matrix

VARIANTS = ("gnd_slp", "gnd_mlp", "gnd_ds", "gcn", "sgc", "fixed_ppr", "fixed_heat")

_VARIANT_DEFAULTS = {
    "gnd_slp": {"r": 16, "K": 20},
    "gnd_mlp": {"r": 64, "K": 20},
    "gnd_ds": {"r": 64, "K": 10, "T": 2},
    "gcn": {},
    "sgc": {"K": 2},
    "fixed_ppr": {"r": 16, "K": 20},
    "fixed_heat": {"r": 16, "K": 20},
}


@dataclass
class ModelConfig:
    variant: str
    K: int = 20
    T: int = 2
    r: int = 16
    hidden_mlp: int = 32
    ds_hidden: int | None = None  # None: use the number of classes
    gcn_hidden: int = 16
    dropout: float = 0.6
    gamma: float = 0.1
    t_heat: float = 3.0
    renormalize_schedule: bool = False

    def validate(self):
        if self.variant not in VARIANTS:
            raise InvalidParameter(f"unknown variant {self.variant!r}")
        if self.K < 1:
            raise InvalidParameter("K must be at least 1")
        if self.T < 0:
            raise InvalidParameter("T must be non-negative")
        if self.r < 1 or self.hidden_mlp < 1 or self.gcn_hidden < 1:
            raise InvalidParameter("widths must be at least 1")
        if self.ds_hidden is not None and self.ds_hidden < 1:
            raise InvalidParameter("ds_hidden must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidParameter(f"dropout must be in [0, 1), got {self.dropout}")
        return self


def default_config(variant: str, **overrides) -> ModelConfig:
    """Config for a variant with its published defaults, then overrides."""
    if variant not in VARIANTS:
        raise InvalidParameter(f"unknown variant {variant!r}")
    fields = dict(_VARIANT_DEFAULTS[variant])
    fields.update(overrides)
    return ModelConfig(variant=variant, **fields).validate()


@dataclass
class GraphOperators:
    """Per-graph constants a forward pass needs, precomputed once."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    transition: SparseMatrix | None = None
    smoothing: SparseMatrix | None = None

    @classmethod
    def prepare(cls, g: Graph, config: ModelConfig):
        a_tilde = add_self_loops(g)
        ops = cls(features=g.features, labels=g.labels, n_classes=g.n_classes)
        if config.variant == "gcn":
            ops.smoothing = renormalized_smoothing(a_tilde)
        else:
            ops.transition = transition_matrix(a_tilde)
        return ops


class ForwardPass:
    """Logits node plus the live tape that produced it."""

    def __init__(self, tape: Tape, logits: Node, model: "Model"):
        self.tape = tape
        self.logits = logits
        self.model = model

    @property
    def probabilities(self) -> np.ndarray:
        return softmax_rows(self.logits.value)

    def loss_node(self, labels, mask, l2: float) -> Node:
        """Masked mean cross-entropy plus l2 * sum of squared weights."""
        ce = self.tape.masked_softmax_cross_entropy(self.logits, labels, mask)
        if l2 == 0.0:
            return ce
        leaves = [self.tape.parameter(p) for _, p in self.model.parameters()]
        return self.tape.add(ce, self.tape.l2_penalty(leaves, l2))


class Model:
    """Parameters and forward pass for one variant on one feature space."""

    def __init__(self, config: ModelConfig, n_features: int, n_classes: int,
                 rng: np.random.Generator):
        config.validate()
        self.config = config
        self.n_features = int(n_features)
        self.n_classes = int(n_classes)
        c, d = config, int(n_features)
        k = int(n_classes)
        self.slp = self.mlp = self.ds = None
        if c.variant in ("gnd_slp", "gnd_mlp", "gnd_ds", "fixed_ppr", "fixed_heat"):
            self.theta = Parameter(glorot_init(d, c.r, rng), name="theta")
            if c.variant == "gnd_slp":
                self.slp = SlpDiffusion(c.K)
            elif c.variant == "gnd_mlp":
                self.mlp = MlpDiffusion(c.K, c.hidden_mlp, rng)
            elif c.variant == "gnd_ds":
                self.ds = DsDiffusion(c.r, c.ds_hidden or k, rng)
            self.theta_prime = Parameter(glorot_init(c.r, k, rng), name="theta_prime")
        elif c.variant == "gcn":
            self.w0 = Parameter(glorot_init(d, c.gcn_hidden, rng), name="w0")
            self.w1 = Parameter(glorot_init(c.gcn_hidden, k, rng), name="w1")
        elif c.variant == "sgc":
            self.theta = Parameter(glorot_init(d, k, rng), name="theta")

    def parameters(self) -> list[tuple[str, Parameter]]:
        v = self.config.variant
        if v == "gnd_slp":
            return [("theta", self.theta), ("alpha", self.slp.alpha),
                    ("theta_prime", self.theta_prime)]
        if v == "gnd_mlp":
            return [("theta", self.theta), ("mlp_layer1", self.mlp.layer1),
                    ("mlp_layer2", self.mlp.layer2), ("theta_prime", self.theta_prime)]
        if v == "gnd_ds":
            return [("theta", self.theta), ("ds_layer1", self.ds.layer1),
                    ("ds_layer2", self.ds.layer2), ("theta_prime", self.theta_prime)]
        if v == "gcn":
            return [("w0", self.w0), ("w1", self.w1)]
        if v == "sgc":
            return [("theta", self.theta)]
        return [("theta", self.theta), ("theta_prime", self.theta_prime)]

    def forward(self, ops: GraphOperators, training: bool = False,
                rng: np.random.Generator | None = None) -> ForwardPass:
        """Run the variant's pipeline; returns logits on a fresh tape.

        Dropout draws come from rng and only happen in training mode.
        """
        c = self.config
        tape = Tape(rng)
        x = tape.dropout(tape.constant(ops.features), c.dropout, training)
        if c.variant == "gcn":
            h = tape.relu(tape.spmm_const(ops.smoothing, tape.matmul(x, tape.parameter(self.w0))))
            logits = tape.spmm_const(ops.smoothing, tape.matmul(h, tape.parameter(self.w1)))
            return ForwardPass(tape, logits, self)
        if c.variant == "sgc":
            z = tape.matmul(x, tape.parameter(self.theta))
            for _ in range(c.K):
                z = tape.spmm_const(ops.transition, z)
            return ForwardPass(tape, z, self)
        z = tape.matmul(x, tape.parameter(self.theta))
        if c.variant == "gnd_ds":
            h = ds_evolve(tape, z, ops.transition, self.ds, c.K, c.T)
        else:
            hops = taped_hops(tape, ops.transition, z, c.K)
            if c.variant == "gnd_slp":
                h = slp_aggregate(tape, hops, self.slp)
            elif c.variant == "gnd_mlp":
                h = mlp_aggregate(tape, hops, self.mlp)
            else:
                kind = "ppr" if c.variant == "fixed_ppr" else "heat"
                sched = DiffusionSchedule(kind=kind, K=c.K, gamma=c.gamma, t=c.t_heat)
                coeffs = schedule_coefficients(sched)
                if c.renormalize_schedule:
                    coeffs = coeffs / coeffs.sum()
                alpha = tape.constant(coeffs[None, :])
                h = tape.relu(tape.scale_by_parameter_row(alpha, hops))
        h = tape.dropout(h, c.dropout, training)
        logits = tape.matmul(h, tape.parameter(self.theta_prime))
        return ForwardPass(tape, logits, self)

    def predict_proba(self, ops: GraphOperators) -> np.ndarray:
        return self.forward(ops, training=False).probabilities


def loss_value(y_pred: np.ndarray, labels, mask, l2: float = 0.0, model: Model | None = None) -> float:
    """Mean cross-entropy of predicted probabilities over masked vertices,
    plus l2 times the summed squared weights of the model if given.

    Matches the value produced by ForwardPass.loss_node when y_pred is that
    pass's probabilities.
    """
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise EmptyMask("loss mask selects no vertices")
    picked = y_pred[mask][np.arange(count), labels[mask]]
    out = -np.mean(np.log(np.maximum(picked, 1e-12)))
    if l2 != 0.0 and model is not None:
        out = out + l2 * sum(np.sum(p.value * p.value) for _, p in model.parameters())
    return float(out)


def predict_labels(probabilities: np.ndarray) -> np.ndarray:
    """Most probable class per row; ties break to the lowest class index."""
    return np.argmax(probabilities, axis=1)


def accuracy(probabilities: np.ndarray, labels, mask) -> float:
    """Fraction of masked vertices whose argmax matches the label."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("accuracy mask selects no vertices")
    preds = predict_labels(probabilities)
    labels = np.asarray(labels, dtype=np.int64)
    return float(np.mean(preds[mask] == labels[mask]))


def save_checkpoint(model: Model, path):
    """Write config and parameters as JSON; values are hex floats so a
    load restores every bit."""
    params = {}
    for name, p in model.parameters():
        params[name] = {
            "shape": list(p.value.shape),
            "values": [v.hex() for v in p.value.ravel()],
        }
    payload = {
        "config": dataclasses.asdict(model.config),
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "parameters": params,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def load_checkpoint(path) -> Model:
    with open(path) as fh:
        payload = json.load(fh)
    config = ModelConfig(**payload["config"])
    model = Model(config, payload["n_features"], payload["n_classes"],
                  np.random.default_rng(0))
    for name, p in model.parameters():
        entry = payload["parameters"][name]
        flat = np.array([float.fromhex(v) for v in entry["values"]])
        p.value = flat.reshape(entry["shape"])
        p.gradient = np.zeros_like(p.value)
        p.adam_m = np.zeros_like(p.value)
        p.adam_v = np.zeros_like(p.value)
        p.step_count = 0
    return model
