"""Mini-batch training of the encoder and worker preferences.

Each step embeds only the items its batch references, differentiates the
choice loss on the tape, and applies the optimizer to trunk, heads and
worker preferences jointly. Worker preference rows are updated sparsely:
a row's moment estimates and step count advance only when that worker
appears in the batch, so absent workers are bit-untouched by a step.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np

from . import objective
from .errors import TrainingError
from .model import EncoderConfig, ModelParams, init_params, save_checkpoint

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    use_entropy: bool = True
    entropy_stop_gradient: bool = False
    deterministic: bool = True
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate < 0:
            raise ValueError("epochs/batch_size/learning_rate out of range")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


class _Adam:
    def __init__(self, arrays, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(a) for k, a in arrays.items()}
        self.v = {k: np.zeros_like(a) for k, a in arrays.items()}
        # per-row step counts for the sparsely updated preference matrix
        self.t = {
            k: (np.zeros(a.shape[0], dtype=np.int64) if k == "worker_prefs" else 0)
            for k, a in arrays.items()
        }

    def step(self, arrays, grads, pref_rows):
        c = self.cfg
        for name, p in arrays.items():
            g = grads[name]
            if name == "worker_prefs":
                rows = pref_rows
                self.t[name][rows] += 1
                t = self.t[name][rows][:, None]
                self.m[name][rows] = c.beta1 * self.m[name][rows] + (1 - c.beta1) * g[rows]
                self.v[name][rows] = c.beta2 * self.v[name][rows] + (1 - c.beta2) * g[rows] ** 2
                m_hat = self.m[name][rows] / (1 - c.beta1**t)
                v_hat = self.v[name][rows] / (1 - c.beta2**t)
                p[rows] -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.eps)
            else:
                self.t[name] += 1
                self.m[name] = c.beta1 * self.m[name] + (1 - c.beta1) * g
                self.v[name] = c.beta2 * self.v[name] + (1 - c.beta2) * g**2
                m_hat = self.m[name] / (1 - c.beta1 ** self.t[name])
                v_hat = self.v[name] / (1 - c.beta2 ** self.t[name])
                p -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.eps)


class _SgdMomentum:
    def __init__(self, arrays, cfg: TrainConfig):
        self.cfg = cfg
        self.vel = {k: np.zeros_like(a) for k, a in arrays.items()}

    def step(self, arrays, grads, pref_rows):
        c = self.cfg
        for name, p in arrays.items():
            if name == "worker_prefs":
                rows = pref_rows
                self.vel[name][rows] = c.momentum * self.vel[name][rows] + grads[name][rows]
                p[rows] -= c.learning_rate * self.vel[name][rows]
            else:
                self.vel[name] = c.momentum * self.vel[name] + grads[name]
                p -= c.learning_rate * self.vel[name]


def _extend_workers(params: ModelParams, triplets, seed: int) -> ModelParams:
    """Add uniform-[0,1) preference rows for worker ids first seen here."""
    known = set(params.worker_ids)
    new_ids = []
    for t in triplets:
        if t.worker not in known:
            known.add(t.worker)
            new_ids.append(t.worker)
    if not new_ids:
        return params
    rng = np.random.default_rng([seed, 2])
    extra = rng.random((len(new_ids), params.worker_prefs.shape[1]))
    return ModelParams(
        trunk=params.trunk,
        heads=params.heads,
        worker_prefs=np.vstack([params.worker_prefs, extra]),
        worker_ids=params.worker_ids + tuple(new_ids),
    )


def train(
    params: ModelParams,
    config: EncoderConfig,
    items,
    triplets,
    cfg: TrainConfig,
    progress=None,
    checkpoint_dir=None,
):
    """Run the optimization; returns (trained ModelParams, per-epoch mean loss).

    The input params are not mutated. `progress`, when given, is called
    with (epoch, mean_loss) after every epoch. Aborts with TrainingError
    (naming epoch, batch and the offending triplet) if the loss leaves
    the finite range.
    """
    if not triplets:
        raise ValueError("no triplets to train on")
    params = _extend_workers(params.clone(), triplets, cfg.seed)
    X_all, ii, jj, kk, wrows = objective._resolve(params, items, triplets)
    arrays = dict(params.named_arrays())
    opt = (_Adam if cfg.optimizer == "adam" else _SgdMomentum)(arrays, cfg)
    rng = np.random.default_rng([cfg.seed, 0])
    n = len(triplets)
    history = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for b_idx, start in enumerate(range(0, n, cfg.batch_size)):
            sel = perm[start : start + cfg.batch_size]
            uniq = np.unique(np.concatenate([ii[sel], jj[sel], kk[sel]]))
            loss, leaves = objective.build_loss_graph(
                params,
                config,
                X_all[uniq],
                np.searchsorted(uniq, ii[sel]),
                np.searchsorted(uniq, jj[sel]),
                np.searchsorted(uniq, kk[sel]),
                wrows[sel],
                use_entropy=cfg.use_entropy,
                entropy_stop_gradient=cfg.entropy_stop_gradient,
            )
            value = float(loss.data)
            if not np.isfinite(value):
                bad = _find_nonfinite(params, config, items, triplets, sel, cfg.use_entropy)
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch}, batch {b_idx}"
                    + (f", triplet {bad}" if bad is not None else ""),
                    epoch=epoch,
                    batch=b_idx,
                    triplet=bad,
                )
            loss.backward()
            grads = {name: leaves[name].grad for name in arrays}
            opt.step(arrays, grads, np.unique(wrows[sel]))
            total += value * len(sel)
        mean_loss = total / n
        history.append(mean_loss)
        if progress is not None:
            progress(epoch, mean_loss)
        if (
            checkpoint_dir
            and cfg.checkpoint_every > 0
            and (epoch + 1) % cfg.checkpoint_every == 0
        ):
            save_checkpoint(
                params, config, os.path.join(checkpoint_dir, f"checkpoint-{epoch + 1:04d}.txt")
            )
    return params, history


def _find_nonfinite(params, config, items, triplets, sel, use_entropy):
    for idx in sel:
        t = triplets[int(idx)]
        if not np.isfinite(
            objective.batch_loss(params, config, items, [t], use_entropy=use_entropy)
        ):
            return t
    return None


def train_single_view_baseline(config: EncoderConfig, items, triplets, cfg: TrainConfig):
    """Same machinery with one view; worker preferences become inert
    (singleton softmax is identically 1). Returns (params, config, history)."""
    base = dataclasses.replace(config, num_views=1)
    workers = sorted({t.worker for t in triplets})
    params = init_params(base, len(workers), seed=cfg.seed, worker_ids=workers)
    trained, history = train(params, base, items, triplets, cfg)
    return trained, base, history


def save_loss_log(history, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for epoch, value in enumerate(history, 1):
            fh.write(f"{epoch}\t{value!r}\n")
