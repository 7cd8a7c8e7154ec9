"""Estimator-style wrapper: construct with hyperparameters, fit on a graph
with partially observed labels, predict classes for every vertex.

The interface follows scikit-learn conventions (get_params / set_params /
fit returning self), so instances work with sklearn.clone and model
selection utilities, without this package depending on scikit-learn.

    >>> clf = GNDNetsClassifier(variant="gnd_slp", random_state=0)
    >>> clf.fit(graph, y)          # y: class ids, -1 where unknown
    >>> clf.predict()              # labels for all vertices of that graph
"""

from __future__ import annotations

import inspect

import numpy as np

from .errors import InsufficientVertices, NotFitted
from .models import GraphOperators, Model, default_config, predict_labels
from .training import Split, TrainConfig, train
from .validation import check_graph, check_labels


class GNDNetsClassifier:
    """Semi-supervised node classifier over learnable graph diffusion.

    Parameters
    ----------
    variant : one of gnd_slp, gnd_mlp, gnd_ds, gcn, sgc, fixed_ppr,
        fixed_heat. Unset width/depth arguments take the variant default.
    n_hops : number of propagation steps K (None: variant default).
    n_steps : evolution steps T, gnd_ds only (None: variant default).
    n_filters : width r of the diffused representation (None: default).
    dropout, learning_rate, weight_decay, max_epochs, patience : training
        hyperparameters, matching TrainConfig.
    validation_size : labeled vertices held out for early stopping; 0
        disables early stopping and trains for max_epochs.
    random_state : seed for splits, initialization, and dropout.
    """

    def __init__(self, variant="gnd_slp", n_hops=None, n_steps=None, n_filters=None,
                 dropout=0.6, learning_rate=0.005, weight_decay=5e-4, max_epochs=1000,
                 patience=50, validation_size=0, teleport=0.1, heat_time=3.0,
                 random_state=0):
        self.variant = variant
        self.n_hops = n_hops
        self.n_steps = n_steps
        self.n_filters = n_filters
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_size = validation_size
        self.teleport = teleport
        self.heat_time = heat_time
        self.random_state = random_state

    # -- sklearn plumbing ------------------------------------------------

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    # -- core API ----------------------------------------------------------

    def _model_config(self):
        overrides = {"dropout": self.dropout, "gamma": self.teleport, "t_heat": self.heat_time}
        if self.n_hops is not None:
            overrides["K"] = self.n_hops
        if self.n_steps is not None:
            overrides["T"] = self.n_steps
        if self.n_filters is not None:
            overrides["r"] = self.n_filters
        return default_config(self.variant, **overrides)

    def fit(self, graph, y=None):
        """Train on the labeled vertices of the graph.

        y overrides graph.labels when given; -1 marks vertices to ignore.
        """
        graph = check_graph(graph)
        if y is None:
            y = graph.labels
        y = check_labels(y, graph.n_vertices, graph.n_classes)
        labeled = np.flatnonzero(y >= 0)
        if labeled.size == 0:
            raise InsufficientVertices("fit needs at least one labeled vertex")
        rng = np.random.default_rng(self.random_state)
        n = graph.n_vertices
        val = np.zeros(n, dtype=bool)
        if self.validation_size > 0:
            if labeled.size <= self.validation_size:
                raise InsufficientVertices(
                    f"validation_size={self.validation_size} needs more than "
                    f"{labeled.size} labeled vertices"
                )
            val[rng.choice(labeled, size=self.validation_size, replace=False)] = True
        train_mask = np.zeros(n, dtype=bool)
        train_mask[labeled] = True
        train_mask &= ~val
        config = self._model_config()
        model = Model(config, graph.n_features, graph.n_classes, rng)
        # train() reads labels through the operators, so use the fit labels
        ops = GraphOperators.prepare(graph, config)
        ops.labels = y
        split = Split(train=train_mask, val=val, test=np.zeros(n, dtype=bool))
        train_config = TrainConfig(lr=self.learning_rate, l2=self.weight_decay,
                                   max_epochs=self.max_epochs, patience=self.patience,
                                   seed=self.random_state)
        self.history_ = train(model, graph, split, train_config, rng=rng, ops=ops)
        self.model_ = model
        self.graph_ = graph
        self.ops_ = ops
        self.n_features_in_ = graph.n_features
        self.classes_ = np.arange(graph.n_classes)
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFitted("call fit() before predicting")

    def _operators_for(self, graph):
        if graph is None or graph is self.graph_:
            return self.ops_
        graph = check_graph(graph)
        if graph.n_features != self.n_features_in_:
            raise NotFitted(
                f"graph has {graph.n_features} features, model was fit with "
                f"{self.n_features_in_}"
            )
        return GraphOperators.prepare(graph, self.model_.config)

    def predict_proba(self, graph=None):
        """Class probabilities for every vertex (fitted graph by default)."""
        self._check_fitted()
        return self.model_.predict_proba(self._operators_for(graph))

    def predict(self, graph=None):
        """Class ids for every vertex; ties break to the lowest class."""
        return predict_labels(self.predict_proba(graph))

    def score(self, graph=None, y=None):
        """Mean accuracy over the labeled entries of y (graph.labels by
        default), across all vertices with a known label."""
        self._check_fitted()
        target_graph = self.graph_ if graph is None else graph
        if y is None:
            y = target_graph.labels
        y = check_labels(y, target_graph.n_vertices, target_graph.n_classes)
        known = y >= 0
        if not known.any():
            raise InsufficientVertices("score needs at least one labeled vertex")
        preds = self.predict(graph)
        return float(np.mean(preds[known] == y[known]))
