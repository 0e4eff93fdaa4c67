"""Scikit-learn style front door for the multiview triplet embedder.

`fit(X, y)` takes the item array and the triplet annotations, trains the
encoder plus worker preferences, and `transform(X)` returns the
concatenated view embeddings, so the model slots into pipelines and
model-selection utilities that expect the estimator protocol.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import objective
from .errors import ShapeError
from .evaluation import preference_report
from .model import EncoderConfig, forward_batch, init_params
from .objective import TripletAnnotation
from .trainer import TrainConfig, train


def _as_item_array(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim < 2:
        raise ShapeError("X must be (n_items, ...) with at least one feature axis")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    return X


def _as_triplets(y) -> list:
    out = []
    for row in y:
        worker, i, j, k = row
        out.append(TripletAnnotation(str(worker), str(int(i)), str(int(j)), str(int(k))))
    return out


class MultiviewTripletEmbedder(BaseEstimator, TransformerMixin):
    """Learns one embedding per view from double-sided triplet choices.

    Parameters mirror the encoder and training configs. `y` for fit and
    score is an iterable of (worker, i, j, k) rows where i/j/k index
    into X and the pair (i, j) was chosen as most similar.
    """

    def __init__(
        self,
        n_views=2,
        embed_dim=8,
        trunk_hidden=(256, 64),
        activation="relu",
        epochs=100,
        batch_size=64,
        learning_rate=1e-3,
        optimizer="adam",
        use_entropy=True,
        entropy_stop_gradient=False,
        deterministic=True,
        random_state=0,
    ):
        self.n_views = n_views
        self.embed_dim = embed_dim
        self.trunk_hidden = trunk_hidden
        self.activation = activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.use_entropy = use_entropy
        self.entropy_stop_gradient = entropy_stop_gradient
        self.deterministic = deterministic
        self.random_state = random_state

    def _config_for(self, X: np.ndarray) -> EncoderConfig:
        if X.ndim == 4:
            h, w, c = X.shape[1:]
        else:
            h, w, c = 1, int(np.prod(X.shape[1:])), 1
        return EncoderConfig(
            height=h,
            width=w,
            channels=c,
            trunk_hidden=tuple(self.trunk_hidden),
            embed_dim=self.embed_dim,
            num_views=self.n_views,
            activation=self.activation,
            seed=self.random_state,
        )

    def fit(self, X, y):
        X = _as_item_array(X)
        triplets = _as_triplets(y)
        if not triplets:
            raise ValueError("y must contain at least one triplet")
        self.config_ = self._config_for(X)
        items = {str(i): X[i] for i in range(X.shape[0])}
        workers = []
        seen = set()
        for t in triplets:
            if t.worker not in seen:
                seen.add(t.worker)
                workers.append(t.worker)
        params = init_params(
            self.config_, len(workers), seed=self.random_state, worker_ids=workers
        )
        cfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            seed=self.random_state,
            use_entropy=self.use_entropy,
            entropy_stop_gradient=self.entropy_stop_gradient,
            deterministic=self.deterministic,
        )
        self.params_, self.loss_history_ = train(params, self.config_, items, triplets, cfg)
        self.worker_ids_ = list(self.params_.worker_ids)
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("fit must be called before this method")

    def embed(self, X) -> np.ndarray:
        """(n, V, D) multiview embeddings."""
        self._check_fitted()
        X = _as_item_array(X)
        return forward_batch(self.params_, self.config_, X.reshape(X.shape[0], -1))

    def transform(self, X) -> np.ndarray:
        """(n, V*D) concatenated view embeddings."""
        emb = self.embed(X)
        return emb.reshape(emb.shape[0], -1)

    def predict_proba(self, X, y) -> np.ndarray:
        """(n_triplets, 3) choice probabilities for pairs (i,j), (i,k), (j,k)."""
        self._check_fitted()
        X = _as_item_array(X)
        triplets = _as_triplets(y)
        items = {str(i): X[i] for i in range(X.shape[0])}
        Xm, ii, jj, kk, wrows = objective._resolve(self.params_, items, triplets)
        Y = forward_batch(self.params_, self.config_, Xm)
        E = np.moveaxis(objective._pair_exponents(Y[ii], Y[jj], Y[kk]), 0, 1)
        logp, *_ = objective._choice_log_probs(
            E, self.params_.worker_prefs[wrows], self.use_entropy
        )
        return np.exp(logp)

    def predict(self, X, y) -> np.ndarray:
        """Index of the predicted pair per triplet: 0=(i,j), 1=(i,k), 2=(j,k)."""
        return self.predict_proba(X, y).argmax(axis=1)

    def score(self, X, y) -> float:
        """Triplet accuracy: annotated pair strictly most probable."""
        p = self.predict_proba(X, y)
        return float(((p[:, 0] > p[:, 1]) & (p[:, 0] > p[:, 2])).mean())

    def preference_shares(self) -> np.ndarray:
        """Per-worker softmax view shares, rows ordered like worker_ids_."""
        self._check_fitted()
        return preference_report(self.params_.worker_prefs)
