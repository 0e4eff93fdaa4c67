"""Multiview encoder: shared trunk, one head per view, checkpoint I/O.

The encoder is an MLP on the flattened image. The hidden widths in
`EncoderConfig.trunk_hidden` describe the whole hidden stack; every
hidden layer except the last is shared across views (the trunk), while
each view owns a private copy of the last hidden layer plus the final
projection to `embed_dim`. Embedding row v of an item is therefore
head_v(trunk(x)), with the trunk activation computed once per item.

Weight matrices are stored (fan_in, fan_out) so a layer computes
``act(x @ w + b)``; the final projection of each head is affine with no
activation.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, ConfigurationError, ShapeError

ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),  # propagates NaN, unlike a mask
    "tanh": np.tanh,
}

CHECKPOINT_MAGIC = "crowdviews-checkpoint v1"


@dataclass(frozen=True)
class EncoderConfig:
    height: int = 16
    width: int = 16
    channels: int = 3
    trunk_hidden: tuple = (256, 64)
    embed_dim: int = 8
    num_views: int = 2
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trunk_hidden", tuple(int(w) for w in self.trunk_hidden))
        if self.height < 1 or self.width < 1 or self.channels < 1:
            raise ConfigurationError("input dimensions must be positive")
        if not self.trunk_hidden:
            raise ConfigurationError("trunk_hidden must be nonempty")
        if any(w < 1 for w in self.trunk_hidden):
            raise ConfigurationError("hidden widths must be positive")
        if self.embed_dim < 1:
            raise ConfigurationError("embed_dim must be >= 1")
        if self.num_views < 1:
            raise ConfigurationError("num_views must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.height * self.width * self.channels

    def trunk_dims(self) -> list:
        """(fan_in, fan_out) of each shared layer, possibly empty."""
        widths = [self.input_dim, *self.trunk_hidden]
        return list(zip(widths[:-2], widths[1:-1]))

    def head_dims(self) -> list:
        """(fan_in, fan_out) of the two layers each view owns."""
        fan_in = self.trunk_hidden[-2] if len(self.trunk_hidden) > 1 else self.input_dim
        return [(fan_in, self.trunk_hidden[-1]), (self.trunk_hidden[-1], self.embed_dim)]

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "EncoderConfig":
        raw = json.loads(text)
        raw["trunk_hidden"] = tuple(raw["trunk_hidden"])
        return cls(**raw)


@dataclass
class Layer:
    w: np.ndarray
    b: np.ndarray


@dataclass
class ModelParams:
    """All trainable state: trunk layers, V head stacks, worker preferences.

    `worker_prefs` has one row per id in `worker_ids`, in the same order.
    """

    trunk: list
    heads: list
    worker_prefs: np.ndarray
    worker_ids: tuple = field(default_factory=tuple)

    @property
    def num_views(self) -> int:
        return len(self.heads)

    def worker_row(self, worker_id: str) -> int:
        try:
            return self._worker_index[worker_id]
        except AttributeError:
            self._worker_index = {w: i for i, w in enumerate(self.worker_ids)}
            return self._worker_index[worker_id]

    def named_arrays(self):
        """Yield (name, live array) for every parameter block, in a fixed order."""
        for i, layer in enumerate(self.trunk):
            yield f"trunk.{i}.w", layer.w
            yield f"trunk.{i}.b", layer.b
        for v, head in enumerate(self.heads):
            for i, layer in enumerate(head):
                yield f"head.{v}.{i}.w", layer.w
                yield f"head.{v}.{i}.b", layer.b
        yield "worker_prefs", self.worker_prefs

    def clone(self) -> "ModelParams":
        return ModelParams(
            trunk=[Layer(l.w.copy(), l.b.copy()) for l in self.trunk],
            heads=[[Layer(l.w.copy(), l.b.copy()) for l in head] for head in self.heads],
            worker_prefs=self.worker_prefs.copy(),
            worker_ids=self.worker_ids,
        )


def default_worker_ids(num_workers: int) -> tuple:
    return tuple(f"w{i + 1}" for i in range(num_workers))


def init_params(config: EncoderConfig, num_workers: int, seed=None, worker_ids=None) -> ModelParams:
    """Seed-deterministic initialization.

    Network weights come from PCG64 stream ``(seed, 0)``: per layer, in
    trunk-then-heads order, weights uniform on ±1/sqrt(fan_in) followed
    by zero biases. Worker preference rows come from their own stream
    ``(seed, 1)`` as `Generator.random((M, V))`, i.e. i.i.d. uniform on
    [0, 1) in row-major order, matching the scale the inherent weights
    live on.
    """
    if num_workers < 1:
        raise ConfigurationError("num_workers must be >= 1")
    if worker_ids is not None and len(worker_ids) != num_workers:
        raise ConfigurationError("worker_ids length must equal num_workers")
    if seed is None:
        seed = config.seed
    rng_net = np.random.default_rng([int(seed), 0])

    def make_layer(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        return Layer(rng_net.uniform(-bound, bound, (fan_in, fan_out)), np.zeros(fan_out))

    trunk = [make_layer(*dims) for dims in config.trunk_dims()]
    heads = [
        [make_layer(*dims) for dims in config.head_dims()]
        for _ in range(config.num_views)
    ]
    rng_workers = np.random.default_rng([int(seed), 1])
    worker_prefs = rng_workers.random((num_workers, config.num_views))
    if worker_ids is None:
        worker_ids = default_worker_ids(num_workers)
    return ModelParams(trunk, heads, worker_prefs, tuple(worker_ids))


def _forward_flat(params: ModelParams, config: EncoderConfig, x2d: np.ndarray) -> np.ndarray:
    act = ACTIVATIONS[config.activation]
    z = x2d
    for layer in params.trunk:
        z = act(z @ layer.w + layer.b)
    out = np.empty((x2d.shape[0], config.num_views, config.embed_dim))
    for v, head in enumerate(params.heads):
        h = act(z @ head[0].w + head[0].b)
        out[:, v, :] = h @ head[1].w + head[1].b
    return out


def forward(params: ModelParams, config: EncoderConfig, item: np.ndarray) -> np.ndarray:
    """Embed one item into its V x D multiview matrix."""
    item = np.asarray(item, dtype=np.float64)
    if item.size != config.input_dim:
        raise ShapeError(
            f"item has {item.size} values, config expects {config.input_dim}"
        )
    return _forward_flat(params, config, item.reshape(1, -1))[0]


def forward_batch(params: ModelParams, config: EncoderConfig, items: np.ndarray) -> np.ndarray:
    """Embed a batch; returns (N, V, D)."""
    items = np.asarray(items, dtype=np.float64)
    if items.ndim < 2 or items[0].size != config.input_dim:
        raise ShapeError("batch items do not match config input dimensions")
    return _forward_flat(params, config, items.reshape(items.shape[0], -1))


def _format_array(arr: np.ndarray) -> list:
    rows = arr.reshape(arr.shape[0], -1) if arr.ndim == 2 else arr.reshape(1, -1)
    return [" ".join(float(v).hex() for v in row) for row in rows]


def save_checkpoint(params: ModelParams, config: EncoderConfig, path) -> None:
    """Write a versioned text checkpoint; hex floats round-trip exactly."""
    lines = [CHECKPOINT_MAGIC]
    lines.append("config " + config.to_json())
    lines.append("workers " + json.dumps(list(params.worker_ids)))
    for name, arr in params.named_arrays():
        lines.append(f"tensor {name} " + " ".join(str(d) for d in arr.shape))
        lines.extend(_format_array(arr))
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _expected_shapes(config: EncoderConfig, num_workers: int) -> dict:
    shapes = {}
    for i, (fi, fo) in enumerate(config.trunk_dims()):
        shapes[f"trunk.{i}.w"] = (fi, fo)
        shapes[f"trunk.{i}.b"] = (fo,)
    for v in range(config.num_views):
        for i, (fi, fo) in enumerate(config.head_dims()):
            shapes[f"head.{v}.{i}.w"] = (fi, fo)
            shapes[f"head.{v}.{i}.b"] = (fo,)
    shapes["worker_prefs"] = (num_workers, config.num_views)
    return shapes


def load_checkpoint(path, expected_views=None):
    """Read a checkpoint; returns (ModelParams, EncoderConfig).

    Raises CheckpointError naming the offending field on any corruption,
    and ShapeError if `expected_views` disagrees with the stored config.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad or missing magic line, expected {CHECKPOINT_MAGIC!r}")
    if lines[-1] != "end":
        raise CheckpointError("truncated checkpoint: missing 'end' sentinel")
    pos = 1

    def expect_prefix(prefix):
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(prefix + " "):
            raise CheckpointError(f"expected {prefix!r} line at line {pos + 1}")
        value = lines[pos][len(prefix) + 1 :]
        pos += 1
        return value

    try:
        config = EncoderConfig.from_json(expect_prefix("config"))
    except (json.JSONDecodeError, TypeError, KeyError, ConfigurationError) as e:
        raise CheckpointError(f"unreadable config: {e}") from e
    try:
        worker_ids = tuple(json.loads(expect_prefix("workers")))
    except json.JSONDecodeError as e:
        raise CheckpointError(f"unreadable workers list: {e}") from e
    if expected_views is not None and config.num_views != expected_views:
        raise ShapeError(
            f"checkpoint has {config.num_views} views, caller requested {expected_views}"
        )

    arrays = {}
    while pos < len(lines) and lines[pos] != "end":
        header = lines[pos].split()
        if header[0] != "tensor" or len(header) < 3:
            raise CheckpointError(f"expected tensor header at line {pos + 1}")
        name = header[1]
        try:
            shape = tuple(int(d) for d in header[2:])
        except ValueError as e:
            raise CheckpointError(f"bad shape for tensor {name}: {e}") from e
        pos += 1
        nrows = shape[0] if len(shape) == 2 else 1
        rows = []
        for r in range(nrows):
            if pos >= len(lines) or lines[pos] == "end":
                raise CheckpointError(f"truncated data for tensor {name}")
            try:
                rows.append([float.fromhex(tok) for tok in lines[pos].split()])
            except ValueError as e:
                raise CheckpointError(f"bad value in tensor {name}: {e}") from e
            pos += 1
        arr = np.array(rows, dtype=np.float64)
        if arr.size != int(np.prod(shape)):
            raise CheckpointError(f"tensor {name}: data does not fill shape {shape}")
        arrays[name] = arr.reshape(shape)

    expected = _expected_shapes(config, len(worker_ids))
    for name, shape in expected.items():
        if name not in arrays:
            raise CheckpointError(f"missing tensor {name}")
        if arrays[name].shape != shape:
            raise CheckpointError(
                f"tensor {name} has shape {arrays[name].shape}, expected {shape}"
            )
    for name in arrays:
        if name not in expected:
            raise CheckpointError(f"unexpected tensor {name}")

    trunk = [
        Layer(arrays[f"trunk.{i}.w"], arrays[f"trunk.{i}.b"])
        for i in range(len(config.trunk_dims()))
    ]
    heads = [
        [Layer(arrays[f"head.{v}.{i}.w"], arrays[f"head.{v}.{i}.b"]) for i in range(2)]
        for v in range(config.num_views)
    ]
    params = ModelParams(trunk, heads, arrays["worker_prefs"], worker_ids)
    return params, config
