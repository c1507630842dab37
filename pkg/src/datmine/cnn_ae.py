"""From-scratch convolutional autoencoder over dense trajectory images.

A video trajectory becomes a 44x64x1 binary image (rows = component index
zero-padded to 44, columns = day, cropped to the first 64 days) and the
autoencoder learns to reconstruct it through a 10-dimensional bottleneck,
which serves as the trajectory embedding.  The fixed architecture is:

    Conv(16, k2x2, s2) -> Conv(32, k2x2, s2) -> Conv(64, k2x2, s2)
    -> Conv(128, k2x2, s2) -> FC(1024 -> 10) -> FC(10 -> 1024)
    -> ConvT(64, k3x2, s2) -> ConvT(32, k3x2, s2) -> ConvT(16, k2x2, s2)
    -> ConvT(1, k2x2, s2)

with ReLU on every hidden layer (the bottleneck included) and a sigmoid on
the output.  Convolutions are valid (no padding, out = floor((in-k)/s) + 1);
transposed convolutions invert the sizing (out = (in-1)*s + k).  The shape
chain on a 44x64x1 input is asserted at model build:
22x32x16, 11x16x32, 5x8x64, 2x4x128, 10, 1024, 5x8x64, 11x16x32, 22x32x16,
44x64x1.

Everything is plain numpy: forward passes are im2col matrix products and
every layer has an exact analytic backward pass (finite-difference checks
live in the test suite).  Training is mini-batch Adam on per-pixel binary
cross-entropy (MSE selectable), deterministic for a fixed seed when run
single-threaded.  The sigmoid-BCE gradient is computed in fused form
(p - target) / n_pixels, which is algebraically the chained gradient but
immune to saturation overflow; the loss value itself clips probabilities to
[1e-7, 1 - 1e-7] so it stays finite for any input.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from .dat import CourseSpec, Dat

IMAGE_ROWS = 44
IMAGE_COLS = 64
BOTTLENECK = 10

# (kind, out_channels, (kh, kw), stride) per layer; FC rows carry sizes.
NETWORK_SPEC: tuple[tuple, ...] = (
    ("conv", 16, (2, 2), 2),
    ("conv", 32, (2, 2), 2),
    ("conv", 64, (2, 2), 2),
    ("conv", 128, (2, 2), 2),
    ("fc", 1024, BOTTLENECK),
    ("fc", BOTTLENECK, 1024),
    ("convt", 64, (3, 2), 2),
    ("convt", 32, (3, 2), 2),
    ("convt", 16, (2, 2), 2),
    ("convt", 1, (2, 2), 2),
)

EXPECTED_CHAIN: tuple[tuple[int, ...], ...] = (
    (22, 32, 16),
    (11, 16, 32),
    (5, 8, 64),
    (2, 4, 128),
    (BOTTLENECK,),
    (1024,),
    (5, 8, 64),
    (11, 16, 32),
    (22, 32, 16),
    (44, 64, 1),
)

_CLIP = 1e-7
_CHECKPOINT_MAGIC = b"DMAE0001"


def dat_to_image(dat: Dat, spec: CourseSpec) -> np.ndarray:
    """Render a trajectory as a 44x64x1 binary image.

    Accesses on days >= 64 are cropped away (their count is
    ``cropped_count``); a component index >= 44 cannot be represented and is
    an error.
    """
    n_comp = spec.n_components(dat.category)
    if n_comp > IMAGE_ROWS:
        raise ValueError(
            f"catalog of {n_comp} components does not fit {IMAGE_ROWS} image rows"
        )
    img = np.zeros((IMAGE_ROWS, IMAGE_COLS, 1), dtype=np.float64)
    for day, comp in dat.entries:
        if comp >= IMAGE_ROWS:
            raise ValueError(f"component index {comp} does not fit {IMAGE_ROWS} rows")
        if day < IMAGE_COLS:
            img[comp, day, 0] = 1.0
    return img


def cropped_count(dat: Dat) -> int:
    """How many accesses of this trajectory fall past the 64-day crop."""
    return sum(1 for day, _ in dat.entries if day >= IMAGE_COLS)


def images_from_dats(dats: Sequence[Dat], spec: CourseSpec) -> tuple[np.ndarray, int]:
    """Stack trajectories into an (n, 44, 64, 1) batch; returns (batch, n_cropped)."""
    if not dats:
        raise ValueError("no trajectories to render")
    batch = np.stack([dat_to_image(d, spec) for d in dats])
    return batch, sum(cropped_count(d) for d in dats)


# ---------------------------------------------------------------------------
# functional layer ops: forward returns (out, cache), backward consumes cache


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                 stride: int) -> tuple[np.ndarray, tuple]:
    """Valid convolution; x is (n, h, w, c_in), w is (kh, kw, c_in, c_out)."""
    n, h, wd, cin = x.shape
    kh, kw, wcin, cout = w.shape
    if wcin != cin:
        raise ValueError(f"conv expects {wcin} input channels, got {cin}")
    oh = (h - kh) // stride + 1
    ow = (wd - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ValueError(f"conv kernel {kh}x{kw} does not fit input {h}x{wd}")
    patches = np.empty((n, oh, ow, kh, kw, cin), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            patches[:, :, :, i, j, :] = x[:, i:i + oh * stride:stride,
                                          j:j + ow * stride:stride, :]
    flat = patches.reshape(n * oh * ow, kh * kw * cin)
    out = (flat @ w.reshape(kh * kw * cin, cout)).reshape(n, oh, ow, cout) + b
    return out, (x.shape, flat, w, stride, (oh, ow))


def conv_backward(dout: np.ndarray,
                  cache: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x_shape, flat, w, stride, (oh, ow) = cache
    n, h, wd, cin = x_shape
    kh, kw, _, cout = w.shape
    dflat_out = dout.reshape(n * oh * ow, cout)
    dw = (flat.T @ dflat_out).reshape(w.shape)
    db = dout.sum(axis=(0, 1, 2))
    dpatches = (dflat_out @ w.reshape(kh * kw * cin, cout).T).reshape(
        n, oh, ow, kh, kw, cin)
    dx = np.zeros(x_shape, dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            dx[:, i:i + oh * stride:stride,
               j:j + ow * stride:stride, :] += dpatches[:, :, :, i, j, :]
    return dx, dw, db


def convt_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                  stride: int) -> tuple[np.ndarray, tuple]:
    """Transposed convolution; x is (n, h, w, c_in), w is (kh, kw, c_in, c_out)."""
    n, h, wd, cin = x.shape
    kh, kw, wcin, cout = w.shape
    if wcin != cin:
        raise ValueError(f"convT expects {wcin} input channels, got {cin}")
    oh = (h - 1) * stride + kh
    ow = (wd - 1) * stride + kw
    out = np.zeros((n, oh, ow, cout), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            out[:, i:i + h * stride:stride,
                j:j + wd * stride:stride, :] += x @ w[i, j]
    out += b
    return out, (x, w, stride, (oh, ow))


def convt_backward(dout: np.ndarray,
                   cache: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, w, stride, (oh, ow) = cache
    n, h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    x_flat = x.reshape(n * h * wd, cin)
    for i in range(kh):
        for j in range(kw):
            dslice = dout[:, i:i + h * stride:stride, j:j + wd * stride:stride, :]
            dx += dslice @ w[i, j].T
            dw[i, j] = x_flat.T @ dslice.reshape(n * h * wd, cout)
    db = dout.sum(axis=(0, 1, 2))
    return dx, dw, db


def fc_forward(x: np.ndarray, w: np.ndarray,
               b: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Dense layer; x is (n, d_in), w is (d_in, d_out)."""
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"fc expects {w.shape[0]} inputs, got {x.shape[1]}")
    return x @ w + b, (x, w)


def fc_backward(dout: np.ndarray,
                cache: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def relu(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    out = np.maximum(x, 0.0)
    return out, (x > 0.0)


def relu_backward(dout: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dout * mask


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(dout: np.ndarray, out: np.ndarray) -> np.ndarray:
    return dout * out * (1.0 - out)


def bce_loss(probs: np.ndarray, target: np.ndarray) -> float:
    """Mean per-pixel binary cross-entropy with clipped probabilities."""
    p = np.clip(probs, _CLIP, 1.0 - _CLIP)
    return float(-np.mean(target * np.log(p) + (1.0 - target) * np.log1p(-p)))


def mse_loss(probs: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((probs - target) ** 2))


# ---------------------------------------------------------------------------
# model


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults follow the pinned design choices."""

    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    loss: str = "bce"

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0.0:
            raise ValueError("hyperparameters must be positive")
        if self.loss not in ("bce", "mse"):
            raise ValueError(f"loss must be 'bce' or 'mse', got {self.loss!r}")


class _Layer:
    kind: str
    w: np.ndarray
    b: np.ndarray

    def __init__(self, kind: str, w: np.ndarray, b: np.ndarray, stride: int = 0):
        self.kind = kind
        self.w = w
        self.b = b
        self.stride = stride


class CnnAutoencoder:
    """The fixed-architecture autoencoder with explicit forward/backward."""

    def __init__(self, seed: int = 0):
        rng = np.random.default_rng(np.random.PCG64(seed))
        self.seed = seed
        self.layers: list[_Layer] = []
        cin = 1
        for row in NETWORK_SPEC:
            if row[0] == "fc":
                _, d_in, d_out = row
                w = rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out))
                self.layers.append(_Layer("fc", w, np.zeros(d_out)))
            else:
                kind, cout, (kh, kw), stride = row
                fan_in = kh * kw * cin
                w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(kh, kw, cin, cout))
                self.layers.append(_Layer(kind, w, np.zeros(cout), stride))
                cin = cout
        self._assert_shape_chain()

    def _assert_shape_chain(self) -> None:
        shape: tuple[int, ...] = (IMAGE_ROWS, IMAGE_COLS, 1)
        for layer, expected in zip(self.layers, EXPECTED_CHAIN):
            if layer.kind == "conv":
                h, w, _ = shape
                kh, kw, _, cout = layer.w.shape
                shape = ((h - kh) // layer.stride + 1,
                         (w - kw) // layer.stride + 1, cout)
            elif layer.kind == "convt":
                if len(shape) == 1:
                    # FC output reshapes to the last encoder feature map
                    shape = EXPECTED_CHAIN[3]
                h, w, _ = shape
                kh, kw, _, cout = layer.w.shape
                shape = ((h - 1) * layer.stride + kh,
                         (w - 1) * layer.stride + kw, cout)
            else:
                shape = (layer.w.shape[1],)
            if shape != expected:
                raise AssertionError(
                    f"shape chain broken at {layer.kind}: got {shape}, "
                    f"expected {expected}"
                )

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for layer in self.layers:
            params.append(layer.w)
            params.append(layer.b)
        return params

    def forward(self, x: np.ndarray,
                keep_cache: bool = False) -> np.ndarray | tuple[np.ndarray, list]:
        """Probabilities for a batch (n, 44, 64, 1); optionally keep caches."""
        if x.ndim != 4 or x.shape[1:] != (IMAGE_ROWS, IMAGE_COLS, 1):
            raise ValueError(f"expected (n, {IMAGE_ROWS}, {IMAGE_COLS}, 1), got {x.shape}")
        caches: list = []
        out = x
        n = x.shape[0]
        for idx, layer in enumerate(self.layers):
            if layer.kind == "fc" and out.ndim == 4:
                flat_shape = out.shape
                out = out.reshape(n, -1)
                caches.append(("reshape", flat_shape))
            if layer.kind == "convt" and out.ndim == 2:
                h, w, c = EXPECTED_CHAIN[3]
                out = out.reshape(n, h, w, c)
                caches.append(("reshape", (n, len(self.layers[idx - 1].b))))
            if layer.kind == "conv":
                out, cache = conv_forward(out, layer.w, layer.b, layer.stride)
            elif layer.kind == "convt":
                out, cache = convt_forward(out, layer.w, layer.b, layer.stride)
            else:
                out, cache = fc_forward(out, layer.w, layer.b)
            caches.append((layer.kind, cache))
            if idx < len(self.layers) - 1:
                out, mask = relu(out)
                caches.append(("relu", mask))
        probs = sigmoid(out)
        caches.append(("sigmoid", probs))
        if keep_cache:
            return probs, caches
        return probs

    def loss_and_gradients(
        self, x: np.ndarray, loss_kind: str = "bce"
    ) -> tuple[float, list[np.ndarray]]:
        """Reconstruction loss and gradients for every parameter.

        The sigmoid and the loss are differentiated jointly: for BCE the
        pre-activation gradient is (p - x) / n_values, exact where the loss
        clip is inactive and saturation-safe everywhere.
        """
        probs, caches = self.forward(x, keep_cache=True)
        m = probs.size
        if loss_kind == "bce":
            loss = bce_loss(probs, x)
            grad = (probs - x) / m
        elif loss_kind == "mse":
            loss = mse_loss(probs, x)
            grad = 2.0 * (probs - x) * probs * (1.0 - probs) / m
        else:
            raise ValueError(f"unknown loss {loss_kind!r}")
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite {loss_kind} loss: {loss}")

        grads: list[np.ndarray] = []
        param_grads: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        layer_idx = len(self.layers) - 1
        assert caches[-1][0] == "sigmoid"
        for kind, cache in reversed(caches[:-1]):
            if kind == "relu":
                grad = relu_backward(grad, cache)
            elif kind == "reshape":
                grad = grad.reshape(cache)
            elif kind == "conv":
                grad, dw, db = conv_backward(grad, cache)
                param_grads[layer_idx] = (dw, db)
                layer_idx -= 1
            elif kind == "convt":
                grad, dw, db = convt_backward(grad, cache)
                param_grads[layer_idx] = (dw, db)
                layer_idx -= 1
            else:
                grad, dw, db = fc_backward(grad, cache)
                param_grads[layer_idx] = (dw, db)
                layer_idx -= 1
        for i in range(len(self.layers)):
            dw, db = param_grads[i]
            grads.append(dw)
            grads.append(db)
        return loss, grads

    def encode(self, images: np.ndarray) -> np.ndarray:
        """Bottleneck activations (n, 10): encoder through FC(1024->10) + ReLU."""
        single = images.ndim == 3
        x = images[None] if single else images
        if x.ndim != 4 or x.shape[1:] != (IMAGE_ROWS, IMAGE_COLS, 1):
            raise ValueError(f"expected (n, {IMAGE_ROWS}, {IMAGE_COLS}, 1), got {x.shape}")
        out = x
        for layer in self.layers[:4]:
            out, _ = conv_forward(out, layer.w, layer.b, layer.stride)
            out, _ = relu(out)
        out = out.reshape(out.shape[0], -1)
        out, _ = fc_forward(out, self.layers[4].w, self.layers[4].b)
        out, _ = relu(out)
        return out[0] if single else out

    def reconstruct(self, images: np.ndarray) -> np.ndarray:
        single = images.ndim == 3
        x = images[None] if single else images
        probs = self.forward(x)
        return probs[0] if single else probs


class Adam:
    """Adam with bias correction; state arrays parallel the parameter list."""

    def __init__(self, params: Sequence[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def train(images: np.ndarray,
          config: TrainConfig | None = None) -> tuple[CnnAutoencoder, list[float]]:
    """Train an autoencoder; returns (model, per-epoch mean loss).

    Mini-batches are reshuffled each epoch from the config seed; with a
    fixed seed and single-threaded execution the loss curve is bit-identical
    across runs.  Non-finite loss aborts with diagnostics.
    """
    config = config or TrainConfig()
    x = np.asarray(images, dtype=np.float64)
    if x.ndim != 4 or x.shape[0] < 1 or x.shape[1:] != (IMAGE_ROWS, IMAGE_COLS, 1):
        raise ValueError(f"expected (n, {IMAGE_ROWS}, {IMAGE_COLS}, 1) images, got {x.shape}")
    model = CnnAutoencoder(seed=config.seed)
    params = model.parameters()
    opt = Adam(params, lr=config.learning_rate)
    shuffle_rng = np.random.default_rng(np.random.PCG64(config.seed + 1))
    n = x.shape[0]
    losses: list[float] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = x[order[start:start + config.batch_size]]
            try:
                loss, grads = model.loss_and_gradients(batch, config.loss)
            except FloatingPointError as exc:
                raise FloatingPointError(
                    f"training diverged at epoch {epoch}, step {start // config.batch_size}: {exc}"
                ) from exc
            opt.step(params, grads)
            epoch_loss += loss * batch.shape[0]
        losses.append(epoch_loss / n)
    return model, losses


# ---------------------------------------------------------------------------
# checkpoint format: magic, u32 header length, JSON header, float64 blobs
# in layer order (weights then bias per layer)


def save_checkpoint(model: CnnAutoencoder, fh: BinaryIO) -> None:
    header = {
        "version": 1,
        "seed": model.seed,
        "layers": [
            {"kind": layer.kind, "w_shape": list(layer.w.shape),
             "b_shape": list(layer.b.shape), "stride": layer.stride}
            for layer in model.layers
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    fh.write(_CHECKPOINT_MAGIC)
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)
    for layer in model.layers:
        fh.write(np.ascontiguousarray(layer.w, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())


def load_checkpoint(fh: BinaryIO) -> CnnAutoencoder:
    magic = fh.read(len(_CHECKPOINT_MAGIC))
    if magic != _CHECKPOINT_MAGIC:
        raise ValueError(f"not a model checkpoint (magic {magic!r})")
    raw_len = fh.read(4)
    raw_header = b"" if len(raw_len) != 4 else fh.read(struct.unpack("<I", raw_len)[0])
    if len(raw_len) != 4 or len(raw_header) == 0:
        raise ValueError("checkpoint truncated")
    header = json.loads(raw_header.decode("utf-8"))
    if header.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {header.get('version')}")
    model = CnnAutoencoder(seed=int(header.get("seed", 0)))
    if len(header["layers"]) != len(model.layers):
        raise ValueError("checkpoint layer count does not match architecture")
    for layer, meta in zip(model.layers, header["layers"]):
        w_shape = tuple(meta["w_shape"])
        b_shape = tuple(meta["b_shape"])
        if layer.kind != meta["kind"] or layer.w.shape != w_shape:
            raise ValueError(
                f"checkpoint layer {meta['kind']}{w_shape} does not match "
                f"architecture layer {layer.kind}{layer.w.shape}"
            )
        w_count = int(np.prod(w_shape))
        b_count = int(np.prod(b_shape))
        w_bytes = fh.read(w_count * 8)
        b_bytes = fh.read(b_count * 8)
        if len(w_bytes) != w_count * 8 or len(b_bytes) != b_count * 8:
            raise ValueError("checkpoint truncated")
        layer.w = np.frombuffer(w_bytes, dtype="<f8").reshape(w_shape).copy()
        layer.b = np.frombuffer(b_bytes, dtype="<f8").reshape(b_shape).copy()
    return model


def embed_dats(dats: Sequence[Dat], spec: CourseSpec,
               config: TrainConfig | None = None):
    """Train on the cohort's images and return (EmbeddingMatrix, model, losses)."""
    from .embedding import EmbeddingMatrix

    config = config or TrainConfig()
    images, _ = images_from_dats(dats, spec)
    model, losses = train(images, config)
    values = model.encode(images)
    ids = tuple(d.learner_id for d in dats)
    return EmbeddingMatrix(ids, values, pipeline="cnn_ae", seed=config.seed), model, losses
