"""Triplet-choice objective: per-view similarities, triplet entropy,
combined view weights, worker choice probabilities, loss and gradients.

All probability math is done in log space. Within a view, the three
pair probabilities are a softmax over the negated squared distances.
Across views, the mixed pair score is sum_v q_v * exp(-d2_v); it is
evaluated by factoring out, per pair, the largest exponent across views
so the three scores stay representable for arbitrarily distant
embeddings, and the final three-way normalization is again a shifted
softmax. A straight transcription of the formulas agrees with this
implementation wherever it does not underflow.

Gradients are exact reverse-mode derivatives of the loss, computed on a
tape (`autodiff`) over a vectorized batch graph. `entropy_stop_gradient`
detaches the decisiveness weights so no gradient reaches the embeddings
through them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import autodiff as ad
from .errors import NumericError, ShapeError, UnknownIdError
from .model import EncoderConfig, ModelParams, forward_batch

LOG3 = float(np.log(3.0))


@dataclass(frozen=True)
class TripletAnnotation:
    """Worker judged pair (i, j) the most similar among (i,j), (i,k), (j,k)."""

    worker: str
    i: str
    j: str
    k: str

    def __post_init__(self):
        if len({self.i, self.j, self.k}) != 3:
            raise ValueError(f"triplet items must be distinct, got {self}")


class ViewPairProbs(NamedTuple):
    p_ij_k: float
    p_ik_j: float
    p_jk_i: float


class WorkerChoiceProbs(NamedTuple):
    p_ij: float
    p_ik: float
    p_jk: float


class TripletWeights(NamedTuple):
    entropy: np.ndarray        # per view, in [0, log 3]
    inherent: np.ndarray       # per view, in [0, 1)
    combined_raw: np.ndarray   # inherent + worker preference (or preference alone)
    combined: np.ndarray       # softmax of combined_raw, sums to 1


def view_similarity(a, b) -> float:
    """exp(-||a - b||^2); underflows to 0.0 for distant vectors, so loss
    paths never call this raw form."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"vector shapes differ: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.exp(-(d @ d)))


def _logsumexp(x: np.ndarray, axis: int, keepdims: bool = False) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    out = m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))
    return out if keepdims else np.squeeze(out, axis=axis)


def _pair_exponents(yi: np.ndarray, yj: np.ndarray, yk: np.ndarray) -> np.ndarray:
    """-||.||^2 for the pairs (i,j), (i,k), (j,k), stacked on a new leading axis."""
    return -np.stack(
        [
            ((yi - yj) ** 2).sum(axis=-1),
            ((yi - yk) ** 2).sum(axis=-1),
            ((yj - yk) ** 2).sum(axis=-1),
        ]
    )


def view_pair_probs(yi, yj, yk) -> ViewPairProbs:
    """Probabilities that each pair is the most similar within one view."""
    yi, yj, yk = (np.asarray(v, dtype=np.float64) for v in (yi, yj, yk))
    if not (yi.shape == yj.shape == yk.shape):
        raise ShapeError("embedding vectors must share one length")
    if not (np.isfinite(yi).all() and np.isfinite(yj).all() and np.isfinite(yk).all()):
        raise NumericError("non-finite embedding input")
    e = _pair_exponents(yi, yj, yk)
    p = np.exp(e - _logsumexp(e, axis=0, keepdims=True))
    return ViewPairProbs(*(float(v) for v in p))


def triplet_entropy(p) -> float:
    """Shannon entropy of the three pair probabilities, in [0, log 3].
    Entries that underflowed to exactly 0 contribute 0 (the x log x limit)."""
    p = np.asarray(p, dtype=np.float64)
    pos = p > 0
    return float(-(p[pos] * np.log(p[pos])).sum())


def inherent_weight(h: float) -> float:
    """Decisiveness of a view: (log 3 - h) / log 3."""
    if not -1e-12 <= h <= LOG3 + 1e-12:
        raise NumericError(f"entropy {h} outside [0, log 3]")
    return min(max((LOG3 - h) / LOG3, 0.0), 1.0)


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    return np.exp(x - _logsumexp(x, axis=axis, keepdims=True))


def combined_weights(inherent, worker_pref, use_entropy: bool = True) -> np.ndarray:
    """Softmax of inherent + preference (or preference alone when the
    entropy term is ablated); sums to 1 over views."""
    inherent = np.asarray(inherent, dtype=np.float64)
    worker_pref = np.asarray(worker_pref, dtype=np.float64)
    if inherent.shape != worker_pref.shape:
        raise ShapeError("inherent and worker_pref must have one entry per view")
    raw = inherent + worker_pref if use_entropy else worker_pref
    return _softmax(raw)


def _choice_log_probs(E: np.ndarray, prefs: np.ndarray, use_entropy: bool):
    """Vectorized worker choice model.

    E: (B, 3, V) pair exponents -d2 per view; prefs: (B, V).
    Returns (logp (B, 3), entropy (B, V), inherent (B, V), raw (B, V), q (B, V)).
    """
    logp_view = E - _logsumexp(E, axis=1, keepdims=True)
    p_view = np.exp(logp_view)
    h = -(p_view * logp_view).sum(axis=1)
    inherent = (LOG3 - h) / LOG3
    raw = inherent + prefs if use_entropy else np.broadcast_to(prefs, inherent.shape)
    q = _softmax(raw, axis=1)
    c = E.max(axis=2, keepdims=True)
    log_mixed = c[:, :, 0] + np.log((q[:, None, :] * np.exp(E - c)).sum(axis=2))
    logp = log_mixed - _logsumexp(log_mixed, axis=1, keepdims=True)
    return logp, h, inherent, raw, q


def worker_choice_probs(Yi, Yj, Yk, worker_pref, use_entropy: bool = True):
    """Choice distribution of one worker over the three pairs of one triplet.

    Yi/Yj/Yk are V x D multiview embeddings, worker_pref the worker's V
    preference scalars. Returns (WorkerChoiceProbs, TripletWeights).
    """
    Yi, Yj, Yk = (np.atleast_2d(np.asarray(Y, dtype=np.float64)) for Y in (Yi, Yj, Yk))
    worker_pref = np.asarray(worker_pref, dtype=np.float64).reshape(-1)
    if not (Yi.shape == Yj.shape == Yk.shape):
        raise ShapeError("embeddings must share the same V x D shape")
    if Yi.shape[0] != worker_pref.shape[0]:
        raise ShapeError(
            f"embeddings have {Yi.shape[0]} views, worker_pref has {worker_pref.shape[0]}"
        )
    E = _pair_exponents(Yi, Yj, Yk)[None, :, :]  # (1, 3, V)
    logp, h, inherent, raw, q = _choice_log_probs(E, worker_pref[None, :], use_entropy)
    probs = WorkerChoiceProbs(*(float(v) for v in np.exp(logp[0])))
    weights = TripletWeights(h[0], inherent[0], raw[0], q[0])
    return probs, weights


def _resolve(params: ModelParams, items: Mapping[str, np.ndarray], triplets):
    """Map triplets onto index arrays over the unique referenced items."""
    index: dict = {}
    order: list = []
    rows = np.empty((len(triplets), 3), dtype=np.intp)
    wrows = np.empty(len(triplets), dtype=np.intp)
    for t_idx, t in enumerate(triplets):
        for slot, item_id in enumerate((t.i, t.j, t.k)):
            if item_id not in index:
                if item_id not in items:
                    raise UnknownIdError(f"triplet references unknown item {item_id!r}")
                index[item_id] = len(order)
                order.append(item_id)
            rows[t_idx, slot] = index[item_id]
        try:
            wrows[t_idx] = params.worker_row(t.worker)
        except KeyError:
            raise UnknownIdError(f"triplet references unknown worker {t.worker!r}") from None
    X = np.stack([np.asarray(items[i], dtype=np.float64).reshape(-1) for i in order])
    return X, rows[:, 0], rows[:, 1], rows[:, 2], wrows


def batch_loss(
    params: ModelParams,
    config: EncoderConfig,
    items: Mapping[str, np.ndarray],
    triplets: Sequence[TripletAnnotation],
    use_entropy: bool = True,
) -> float:
    """Mean negative log probability of the annotated pairs (the training
    loss); equals log 3 when every choice distribution is uniform."""
    if not triplets:
        raise ValueError("batch_loss requires at least one triplet")
    X, ii, jj, kk, wrows = _resolve(params, items, triplets)
    Y = forward_batch(params, config, X)
    E = np.moveaxis(_pair_exponents(Y[ii], Y[jj], Y[kk]), 0, 1)  # (B, 3, V)
    logp, *_ = _choice_log_probs(E, params.worker_prefs[wrows], use_entropy)
    return float(-logp[:, 0].mean())


def build_loss_graph(
    params: ModelParams,
    config: EncoderConfig,
    X: np.ndarray,
    ii: np.ndarray,
    jj: np.ndarray,
    kk: np.ndarray,
    wrows: np.ndarray,
    use_entropy: bool = True,
    entropy_stop_gradient: bool = False,
):
    """Tape version of the batch loss over pre-resolved index arrays.

    X is the (U, input_dim) matrix of the unique items; ii/jj/kk/wrows
    index into X rows and worker_prefs rows. Returns (loss Tensor,
    leaves dict keyed like ModelParams.named_arrays()).
    """
    leaves = {name: ad.leaf(arr) for name, arr in params.named_arrays()}
    act = ad.relu if config.activation == "relu" else ad.tanh

    z = ad.Tensor(X)
    for i in range(len(params.trunk)):
        z = act(z @ leaves[f"trunk.{i}.w"] + leaves[f"trunk.{i}.b"])

    B = len(ii)
    pair_exps = []  # per view: (B, 3)
    for v in range(config.num_views):
        h = act(z @ leaves[f"head.{v}.0.w"] + leaves[f"head.{v}.0.b"])
        y = h @ leaves[f"head.{v}.1.w"] + leaves[f"head.{v}.1.b"]
        yi, yj, yk = ad.gather(y, ii), ad.gather(y, jj), ad.gather(y, kk)
        exps = []
        for a, b in ((yi, yj), (yi, yk), (yj, yk)):
            d = a - b
            exps.append(-ad.tsum(d * d, axis=1))
        pair_exps.append(ad.stack(exps, axis=1))
    E = ad.stack(pair_exps, axis=2)  # (B, 3, V)

    prefs = ad.gather(leaves["worker_prefs"], wrows)  # (B, V)
    if use_entropy:
        logp_view = ad.log_softmax(E, axis=1)
        p_view = ad.exp(logp_view)
        h_ent = -ad.tsum(p_view * logp_view, axis=1)  # (B, V)
        inherent = (LOG3 - h_ent) * (1.0 / LOG3)
        if entropy_stop_gradient:
            inherent = inherent.detach()
        q = ad.softmax(inherent + prefs, axis=1)
    else:
        q = ad.softmax(prefs, axis=1)

    shift = ad.Tensor(E.data.max(axis=2, keepdims=True))  # constant, per pair
    mixed = ad.tsum(ad.reshape(q, (B, 1, config.num_views)) * ad.exp(E - shift), axis=2)
    log_mixed = ad.log(mixed) + ad.reshape(shift, (B, 3))
    logp = ad.log_softmax(log_mixed, axis=1)
    loss = -ad.tsum(ad.take_index(logp, 0, axis=1)) * (1.0 / B)
    return loss, leaves


def loss_and_gradients(
    params: ModelParams,
    config: EncoderConfig,
    items: Mapping[str, np.ndarray],
    triplets: Sequence[TripletAnnotation],
    use_entropy: bool = True,
    entropy_stop_gradient: bool = False,
):
    """Loss value plus exact gradients keyed by parameter name."""
    X, ii, jj, kk, wrows = _resolve(params, items, triplets)
    loss, leaves = build_loss_graph(
        params, config, X, ii, jj, kk, wrows, use_entropy, entropy_stop_gradient
    )
    loss.backward()
    grads = {
        name: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for name, t in leaves.items()
    }
    return float(loss.data), grads


def loss_gradients(
    params: ModelParams,
    config: EncoderConfig,
    items: Mapping[str, np.ndarray],
    triplets: Sequence[TripletAnnotation],
    use_entropy: bool = True,
    entropy_stop_gradient: bool = False,
):
    """Gradients of `batch_loss` w.r.t. every parameter block."""
    return loss_and_gradients(
        params, config, items, triplets, use_entropy, entropy_stop_gradient
    )[1]
