"""From-scratch 1D CNN regressor with analytic backpropagation.

Pipeline: conv(8->32) -> ReLU -> maxpool(2) -> conv(32->64) -> ReLU ->
maxpool(2) -> flatten -> dense(128) -> ReLU -> dense(1) -> sigmoid.
All arithmetic is double precision; convolutions are lowered to GEMM via
an im2col transform.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericError, ShapeError, ValidationError
from .rng import rng_from_seed
from .sparams import FEATURE_CHANNELS, N_POINTS, FeatureTensor

PARAM_BLOCKS = ("conv1_w", "conv1_b", "conv2_w", "conv2_b",
                "fc1_w", "fc1_b", "fc2_w", "fc2_b")

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    in_channels: int = FEATURE_CHANNELS
    input_len: int = N_POINTS
    conv1_channels: int = 32
    conv1_kernel: int = 7
    conv2_channels: int = 64
    conv2_kernel: int = 5
    stride: int = 1
    pool: int = 2
    hidden: int = 128

    def __post_init__(self):
        if min(self.conv1_kernel, self.conv2_kernel, self.stride, self.pool,
               self.hidden, self.conv1_channels, self.conv2_channels) < 1:
            raise ValidationError("architecture hyperparameters must be >= 1")
        if self.len_after_pool2 < 1:
            raise ShapeError(f"input length {self.input_len} too short for this architecture")

    @property
    def len_after_conv1(self):
        return (self.input_len - self.conv1_kernel) // self.stride + 1

    @property
    def len_after_pool1(self):
        return self.len_after_conv1 // self.pool

    @property
    def len_after_conv2(self):
        return (self.len_after_pool1 - self.conv2_kernel) // self.stride + 1

    @property
    def len_after_pool2(self):
        return self.len_after_conv2 // self.pool

    @property
    def flattened_len(self):
        return self.conv2_channels * self.len_after_pool2


@dataclass(frozen=True)
class Conv1DLayer:
    weights: np.ndarray  # [out_channels, in_channels, kernel]
    bias: np.ndarray     # [out_channels]
    stride: int = 1

    def __post_init__(self):
        if self.weights.ndim != 3 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"inconsistent conv layer shapes {self.weights.shape} / "
                             f"{self.bias.shape}")
        if self.stride < 1:
            raise ValidationError("stride must be >= 1")


@dataclass(frozen=True)
class ModelParams:
    arch: Architecture
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray

    def __post_init__(self):
        a = self.arch
        expected = {
            "conv1_w": (a.conv1_channels, a.in_channels, a.conv1_kernel),
            "conv1_b": (a.conv1_channels,),
            "conv2_w": (a.conv2_channels, a.conv1_channels, a.conv2_kernel),
            "conv2_b": (a.conv2_channels,),
            "fc1_w": (a.hidden, a.flattened_len),
            "fc1_b": (a.hidden,),
            "fc2_w": (1, a.hidden),
            "fc2_b": (1,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ShapeError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"non-finite values in {name}")

    def blocks(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_BLOCKS}

    def with_blocks(self, blocks: dict) -> "ModelParams":
        return replace(self, **blocks)


def relu(x):
    return np.maximum(0.0, x)


def sigmoid(x):
    # numerically stable split form
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _im2col(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """[B, C, L] -> [B, L_out, C * kernel] patch matrix."""
    windows = sliding_window_view(x, kernel, axis=2)[:, :, ::stride, :]  # [B,C,L_out,K]
    return np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(
        x.shape[0], -1, x.shape[1] * kernel)


def conv1d_forward(x: np.ndarray, layer: Conv1DLayer) -> np.ndarray:
    """Valid-mode cross-correlation; accepts [C, L] or [B, C, L]."""
    single = x.ndim == 2
    xb = x[None] if single else x
    if xb.ndim != 3 or xb.shape[1] != layer.weights.shape[1]:
        raise ShapeError(f"input shape {x.shape} incompatible with conv weights "
                         f"{layer.weights.shape}")
    if xb.shape[2] < layer.weights.shape[2]:
        raise ShapeError("input shorter than kernel")
    out = _conv_batch(xb, layer.weights, layer.bias, layer.stride)[0]
    return out[0] if single else out


def _conv_batch(x, w, b, stride):
    """Returns (out [B, C_out, L_out], xcol) with xcol kept for backprop."""
    c_out, c_in, k = w.shape
    xcol = _im2col(x, k, stride)                          # [B, L_out, C_in*K]
    out = xcol @ w.reshape(c_out, c_in * k).T + b         # [B, L_out, C_out]
    return out.transpose(0, 2, 1), xcol


def _conv_backward(dout, xcol, w, stride, input_len):
    """dout [B, C_out, L_out] -> (dx, dw, db)."""
    c_out, c_in, k = w.shape
    b_sz, _, l_out = dout.shape
    dmat = dout.transpose(0, 2, 1).reshape(b_sz * l_out, c_out)   # [B*L_out, C_out]
    dw = (dmat.T @ xcol.reshape(b_sz * l_out, c_in * k)).reshape(c_out, c_in, k)
    db = dout.sum(axis=(0, 2))
    dcol = (dmat @ w.reshape(c_out, c_in * k)).reshape(b_sz, l_out, c_in, k)
    dx = np.zeros((b_sz, c_in, input_len))
    for kk in range(k):
        dx[:, :, kk:kk + l_out * stride:stride] += dcol[:, :, :, kk].transpose(0, 2, 1)
    return dx, dw, db


def maxpool_forward(x: np.ndarray, pool: int):
    """Non-overlapping max pooling; returns (pooled, argmax indices).

    Ties resolve to the lowest index; trailing remainder elements are
    dropped. Accepts [C, L] or [B, C, L].
    """
    if pool < 1:
        raise ValidationError("pool must be >= 1")
    single = x.ndim == 2
    xb = x[None] if single else x
    l_out = xb.shape[2] // pool
    xr = xb[:, :, :l_out * pool].reshape(xb.shape[0], xb.shape[1], l_out, pool)
    idx = xr.argmax(axis=3)
    out = np.take_along_axis(xr, idx[..., None], axis=3)[..., 0]
    # absolute position within the unpooled axis
    idx = idx + np.arange(l_out)[None, None, :] * pool
    if single:
        return out[0], idx[0]
    return out, idx


def _maxpool_backward(dout, idx, pool, input_len):
    b_sz, c, l_out = dout.shape
    dx = np.zeros((b_sz, c, input_len))
    flat = (np.arange(b_sz)[:, None, None] * c + np.arange(c)[None, :, None]) * input_len + idx
    np.add.at(dx.reshape(-1), flat.ravel(), dout.ravel())
    return dx


@dataclass
class ForwardCache:
    """Intermediates needed by the backward pass."""

    x: np.ndarray
    xcol1: np.ndarray
    z1: np.ndarray
    idx1: np.ndarray
    a1_len: int
    xcol2: np.ndarray
    z2: np.ndarray
    idx2: np.ndarray
    a2_len: int
    flat: np.ndarray
    z_fc1: np.ndarray
    h: np.ndarray
    z_out: np.ndarray
    pred: np.ndarray


def _stage1(x, p):
    """conv1 -> ReLU -> pool; returns (pooled, xcol1, z1, idx1, conv_len)."""
    z1, xcol1 = _conv_batch(x, p.conv1_w, p.conv1_b, p.arch.stride)
    p1, idx1 = maxpool_forward(relu(z1), p.arch.pool)
    return p1, xcol1, z1, idx1, z1.shape[2]


def _stage2(p1, p):
    """conv2 -> ReLU -> pool -> flatten; returns (flat, xcol2, z2, idx2, conv_len)."""
    z2, xcol2 = _conv_batch(p1, p.conv2_w, p.conv2_b, p.arch.stride)
    p2, idx2 = maxpool_forward(relu(z2), p.arch.pool)
    return p2.reshape(p1.shape[0], -1), xcol2, z2, idx2, z2.shape[2]


def _head(flat, p):
    """dense -> ReLU -> dense -> sigmoid; returns (pred, z_fc1, h, z_out)."""
    z_fc1 = flat @ p.fc1_w.T + p.fc1_b
    h = relu(z_fc1)
    z_out = h @ p.fc2_w.T + p.fc2_b  # [B, 1]
    return sigmoid(z_out[:, 0]), z_fc1, h, z_out


def forward_batch(x: np.ndarray, p: ModelParams) -> tuple:
    """Forward pass over a batch [B, C, L]; returns (pred [B], cache)."""
    a = p.arch
    if x.ndim != 3 or x.shape[1] != a.in_channels or x.shape[2] != a.input_len:
        raise ShapeError(f"input shape {x.shape} does not match architecture "
                         f"[B, {a.in_channels}, {a.input_len}]")
    p1, xcol1, z1, idx1, len1 = _stage1(x, p)
    flat, xcol2, z2, idx2, len2 = _stage2(p1, p)
    pred, z_fc1, h, z_out = _head(flat, p)
    cache = ForwardCache(x=x, xcol1=xcol1, z1=z1, idx1=idx1, a1_len=len1,
                         xcol2=xcol2, z2=z2, idx2=idx2, a2_len=len2,
                         flat=flat, z_fc1=z_fc1, h=h, z_out=z_out, pred=pred)
    return pred, cache


def model_forward(x: FeatureTensor, p: ModelParams) -> tuple:
    """Single-sample forward pass; returns (prediction in (0, 1), cache)."""
    pred, cache = forward_batch(x.values[None], p)
    return float(pred[0]), cache


def backward_batch(cache: ForwardCache, p: ModelParams, d_pred: np.ndarray) -> dict:
    """Gradients of sum_i d_pred[i] * pred[i] w.r.t. every parameter block."""
    a = p.arch
    d_pred = np.asarray(d_pred, dtype=float)
    if d_pred.shape != cache.pred.shape:
        raise ShapeError(f"d_pred shape {d_pred.shape} does not match cached batch "
                         f"{cache.pred.shape}")
    dz_out = (d_pred * cache.pred * (1.0 - cache.pred))[:, None]  # sigmoid'
    g = {}
    g["fc2_w"] = dz_out.T @ cache.h
    g["fc2_b"] = dz_out.sum(axis=0)
    dh = dz_out @ p.fc2_w
    dz_fc1 = dh * (cache.z_fc1 > 0)
    g["fc1_w"] = dz_fc1.T @ cache.flat
    g["fc1_b"] = dz_fc1.sum(axis=0)
    dflat = dz_fc1 @ p.fc1_w
    dp2 = dflat.reshape(-1, a.conv2_channels, a.len_after_pool2)
    dr2 = _maxpool_backward(dp2, cache.idx2, a.pool, cache.a2_len)
    dz2 = dr2 * (cache.z2 > 0)
    dp1, g["conv2_w"], g["conv2_b"] = _conv_backward(dz2, cache.xcol2, p.conv2_w,
                                                     a.stride, a.len_after_pool1)
    dr1 = _maxpool_backward(dp1, cache.idx1, a.pool, cache.a1_len)
    dz1 = dr1 * (cache.z1 > 0)
    _, g["conv1_w"], g["conv1_b"] = _conv_backward(dz1, cache.xcol1, p.conv1_w,
                                                   a.stride, a.input_len)
    return g


def model_backward(cache: ForwardCache, p: ModelParams, d_loss_d_pred: float) -> dict:
    """Single-sample backprop matching model_forward."""
    if cache.pred.shape != (1,):
        raise ShapeError("cache does not belong to a single-sample forward pass")
    return backward_batch(cache, p, np.array([d_loss_d_pred]))


def mse_loss(pred, target) -> tuple:
    """Mean squared error and its gradient w.r.t. each prediction."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape or pred.size == 0:
        raise ValidationError(f"pred/target shapes {pred.shape}/{target.shape} invalid")
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / pred.size


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @staticmethod
    def for_params(p: ModelParams, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, arr in p.blocks().items():
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        return state


def adam_step(p: ModelParams, grads: dict, state: AdamState) -> tuple:
    """One bias-corrected Adam update; returns (new params, mutated state)."""
    for name in PARAM_BLOCKS:
        if not np.all(np.isfinite(grads[name])):
            raise NumericError(f"non-finite gradient in block '{name}'")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    new_blocks = {}
    for name, theta in p.blocks().items():
        g = grads[name]
        state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        new_blocks[name] = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return p.with_blocks(new_blocks), state


def init_params(seed: int, arch: Architecture = Architecture()) -> ModelParams:
    """He-uniform init for ReLU-fed layers, Xavier-uniform for the output."""
    rng = rng_from_seed(seed)

    def he(shape, fan_in):
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape)

    conv1_w = he((arch.conv1_channels, arch.in_channels, arch.conv1_kernel),
                 arch.in_channels * arch.conv1_kernel)
    conv2_w = he((arch.conv2_channels, arch.conv1_channels, arch.conv2_kernel),
                 arch.conv1_channels * arch.conv2_kernel)
    fc1_w = he((arch.hidden, arch.flattened_len), arch.flattened_len)
    xavier = np.sqrt(6.0 / (arch.hidden + 1))
    fc2_w = rng.uniform(-xavier, xavier, size=(1, arch.hidden))
    return ModelParams(arch=arch,
                       conv1_w=conv1_w, conv1_b=np.zeros(arch.conv1_channels),
                       conv2_w=conv2_w, conv2_b=np.zeros(arch.conv2_channels),
                       fc1_w=fc1_w, fc1_b=np.zeros(arch.hidden),
                       fc2_w=fc2_w, fc2_b=np.zeros(1))


def predict_batch(p: ModelParams, x: np.ndarray) -> np.ndarray:
    pred, _ = forward_batch(x, p)
    return pred


def gradient_check(p: ModelParams, x: FeatureTensor, target: float,
                   eps: float = 1e-5, n_per_block: int = 200, seed: int = 0) -> float:
    """Max relative error between backprop and central finite differences.

    The loss is the squared error of the single prediction. At most
    n_per_block randomly chosen parameters are probed per block; the
    relative error is |a - b| / max(|a|, |b|, 1e-8).

    A probe whose perturbation flips a ReLU sign or a max-pool argmax is
    discarded: the loss is not differentiable inside that interval, so the
    finite difference does not estimate the derivative there.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValidationError(f"eps must be in [1e-7, 1e-3], got {eps}")
    pred, cache = model_forward(x, p)
    analytic = model_backward(cache, p, 2.0 * (pred - target))
    rng = rng_from_seed(seed)
    a = p.arch
    z1 = cache.z1[0]
    p1 = np.take_along_axis(relu(cache.z1), cache.idx1, axis=2)[0]
    z2 = cache.z2[0]
    z_fc1 = cache.z_fc1[0]
    h = cache.h[0]
    z_out = float(cache.z_out[0, 0])
    idx1, idx2 = cache.idx1[0], cache.idx2[0]
    l1, l2 = a.len_after_conv1, a.len_after_conv2

    def loss_of(z):
        return (float(sigmoid(np.array([z]))[0]) - target) ** 2

    def from_z2(z2p):
        """Tail from a perturbed conv2 pre-activation; None on a kink flip."""
        if not np.array_equal(z2p > 0, z2 > 0):
            return None
        p2, idx2p = maxpool_forward(relu(z2p), a.pool)
        if not np.array_equal(idx2p, idx2):
            return None
        flat = p2.reshape(1, -1)
        z_fc1p = (flat @ p.fc1_w.T + p.fc1_b)[0]
        if not np.array_equal(z_fc1p > 0, z_fc1 > 0):
            return None
        return loss_of(float(relu(z_fc1p) @ p.fc2_w[0]) + float(p.fc2_b[0]))

    def from_z1(z1p, channel):
        """Tail from conv1 channel `channel` perturbed; None on a kink flip."""
        if not np.array_equal(z1p > 0, z1[channel] > 0):
            return None
        p1c, idx1c = maxpool_forward(relu(z1p)[None], a.pool)
        if not np.array_equal(idx1c[0], idx1[channel]):
            return None
        delta = (p1c[0] - p1[channel])[None, None, :]
        dz2 = _conv_batch(delta, p.conv2_w[:, channel:channel + 1, :],
                          np.zeros(a.conv2_channels), a.stride)[0][0]
        return from_z2(z2 + dz2)

    def probe(name, idx, step):
        if name == "conv1_w":
            o, c, k = idx
            z1p = z1[o] + step * cache.x[0, c, k:k + l1 * a.stride:a.stride][:l1]
            return from_z1(z1p, o)
        if name == "conv1_b":
            return from_z1(z1[idx[0]] + step, idx[0])
        if name == "conv2_w":
            o, c, k = idx
            z2p = z2.copy()
            z2p[o] = z2[o] + step * p1[c, k:k + l2 * a.stride:a.stride][:l2]
            return from_z2(z2p)
        if name == "conv2_b":
            z2p = z2.copy()
            z2p[idx[0]] = z2[idx[0]] + step
            return from_z2(z2p)
        if name in ("fc1_w", "fc1_b"):
            i = idx[0]
            dz = step * (cache.flat[0, idx[1]] if name == "fc1_w" else 1.0)
            zi = z_fc1[i] + dz
            if (zi > 0) != (z_fc1[i] > 0):
                return None
            return loss_of(z_out + p.fc2_w[0, i] * (relu(zi) - h[i]))
        if name == "fc2_w":
            return loss_of(z_out + step * h[idx[1]])
        return loss_of(z_out + step)  # fc2_b

    max_err = 0.0
    for name, arr in p.blocks().items():
        n_probe = min(n_per_block, arr.size)
        for fi in rng.choice(arr.size, size=n_probe, replace=False):
            idx = np.unravel_index(fi, arr.shape)
            lp = probe(name, idx, eps)
            lm = probe(name, idx, -eps)
            if lp is None or lm is None:
                continue  # kink inside the perturbation interval; FD invalid here
            fd = (lp - lm) / (2 * eps)
            an = analytic[name][idx]
            err = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
            max_err = max(max_err, float(err))
    return max_err


def save_checkpoint(path, p: ModelParams, seed: int) -> None:
    """Persist architecture, parameters and the training seed."""
    arch = p.arch
    meta = dict(version=CHECKPOINT_VERSION, seed=int(seed),
                in_channels=arch.in_channels, input_len=arch.input_len,
                conv1_channels=arch.conv1_channels, conv1_kernel=arch.conv1_kernel,
                conv2_channels=arch.conv2_channels, conv2_kernel=arch.conv2_kernel,
                stride=arch.stride, pool=arch.pool, hidden=arch.hidden)
    np.savez(path, **{f"meta_{k}": np.array(v) for k, v in meta.items()},
             **p.blocks())


def load_checkpoint(path) -> tuple:
    """Load (ModelParams, seed) written by save_checkpoint."""
    try:
        data = np.load(path)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot load checkpoint {path}: {exc}")
    if "meta_version" not in data or int(data["meta_version"]) != CHECKPOINT_VERSION:
        raise ValidationError(f"unsupported checkpoint version in {path}")
    arch = Architecture(in_channels=int(data["meta_in_channels"]),
                        input_len=int(data["meta_input_len"]),
                        conv1_channels=int(data["meta_conv1_channels"]),
                        conv1_kernel=int(data["meta_conv1_kernel"]),
                        conv2_channels=int(data["meta_conv2_channels"]),
                        conv2_kernel=int(data["meta_conv2_kernel"]),
                        stride=int(data["meta_stride"]), pool=int(data["meta_pool"]),
                        hidden=int(data["meta_hidden"]))
    blocks = {name: data[name] for name in PARAM_BLOCKS}
    return ModelParams(arch=arch, **blocks), int(data["meta_seed"])
