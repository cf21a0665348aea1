"""Minimal differentiable network with manual backpropagation.

Two identical-topology dense encoders (separate weights) embed the current
and upcoming furniture descriptors, a small CNN embeds the occupancy image,
and the concatenated trunk feeds a diagonal Gaussian actor head plus a linear
value head.  Everything is float64 numpy; convolutions run through im2col so
forward and backward are plain matrix products.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import erf

LOG_2PI = math.log(2.0 * math.pi)

CHECKPOINT_MAGIC = b"FNWB"
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable, truncated, or corrupt checkpoint file."""


@dataclass(frozen=True)
class NetConfig:
    descriptor_dim: int = 12
    encoder_widths: tuple[int, ...] = (64, 64)
    grid_size: int = 64
    conv_channels: tuple[int, ...] = (8, 16)
    conv_kernels: tuple[int, ...] = (5, 3)
    conv_strides: tuple[int, ...] = (2, 2)
    grid_embed: int = 128
    action_dim: int = 3
    logstd_min: float = -5.0
    logstd_max: float = 2.0
    logstd_bias_init: float = -0.5
    spatial_encoding: bool = True

    def conv_sizes(self) -> list[int]:
        sizes = [self.grid_size]
        for k, s in zip(self.conv_kernels, self.conv_strides):
            sizes.append((sizes[-1] - k) // s + 1)
        return sizes

    @property
    def conv_flat_dim(self) -> int:
        return self.conv_channels[-1] * self.conv_sizes()[-1] ** 2

    @property
    def joint_dim(self) -> int:
        return 2 * self.encoder_widths[-1] + self.grid_embed


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU: x * Phi(x) with the Gaussian CDF in erf form."""
    return x * 0.5 * (1.0 + erf(x / math.sqrt(2.0)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    phi = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0))) + x * phi


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class PolicyParams:
    config: NetConfig
    tensors: dict[str, np.ndarray]

    @staticmethod
    def initialize(config: NetConfig, rng: np.random.Generator) -> "PolicyParams":
        t: dict[str, np.ndarray] = {}
        for enc in ("enc_cur", "enc_nxt"):
            dims = (config.descriptor_dim, *config.encoder_widths)
            for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
                t[f"{enc}_w{i}"] = _glorot(rng, (dout, din), din, dout)
                t[f"{enc}_b{i}"] = np.zeros(dout)
        chans = (1, *config.conv_channels)
        for i, (cin, cout) in enumerate(zip(chans[:-1], chans[1:])):
            k = config.conv_kernels[i]
            t[f"conv{i}_w"] = _glorot(rng, (cout, cin, k, k), cin * k * k, cout * k * k)
            t[f"conv{i}_b"] = np.zeros(cout)
        t["grid_w"] = _glorot(rng, (config.grid_embed, config.conv_flat_dim), config.conv_flat_dim, config.grid_embed)
        t["grid_b"] = np.zeros(config.grid_embed)
        j = config.joint_dim
        t["mu_w"] = _glorot(rng, (config.action_dim, j), j, config.action_dim)
        t["mu_b"] = np.zeros(config.action_dim)
        t["logstd_w"] = _glorot(rng, (config.action_dim, j), j, config.action_dim)
        t["logstd_b"] = np.full(config.action_dim, config.logstd_bias_init)
        t["value_w"] = _glorot(rng, (1, j), j, 1)
        t["value_b"] = np.zeros(1)
        return PolicyParams(config=config, tensors=t)

    def copy(self) -> "PolicyParams":
        return PolicyParams(config=self.config, tensors={k: v.copy() for k, v in self.tensors.items()})

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.tensors.values())


_COL_INDEX_CACHE: dict[tuple[int, int, int, int, int], np.ndarray] = {}


def _col_indices(cin: int, size: int, kernel: int, stride: int, out: int) -> np.ndarray:
    """Flat gather indices (positions, cin*k*k) into a (cin, size, size) image."""
    key = (cin, size, kernel, stride, out)
    if key not in _COL_INDEX_CACHE:
        oy, ox = np.meshgrid(np.arange(out), np.arange(out), indexing="ij")
        base = (oy * stride) * size + (ox * stride)  # (out, out)
        c, ky, kx = np.meshgrid(np.arange(cin), np.arange(kernel), np.arange(kernel), indexing="ij")
        offset = c * size * size + ky * size + kx  # (cin, k, k)
        idx = base.reshape(-1, 1) + offset.reshape(1, -1)
        _COL_INDEX_CACHE[key] = idx
    return _COL_INDEX_CACHE[key]


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int):
    """x: (B, Cin, H, H); returns (out image (B, Cout, O, O), col matrix for backward)."""
    batch, cin, size, _ = x.shape
    cout, _, k, _ = w.shape
    out = (size - k) // stride + 1
    idx = _col_indices(cin, size, k, stride, out)
    cols = x.reshape(batch, -1)[:, idx]  # (B, P, cin*k*k)
    flat = cols.reshape(batch * out * out, -1) @ w.reshape(cout, -1).T  # one GEMM
    flat += b
    img = flat.reshape(batch, out * out, cout).transpose(0, 2, 1).reshape(batch, cout, out, out)
    return img, cols


def _conv_backward(dimg: np.ndarray, cols: np.ndarray, w: np.ndarray, x_shape, stride: int):
    batch, cin, size, _ = x_shape
    cout, _, k, _ = w.shape
    out = dimg.shape[-1]
    positions = out * out
    dflat = dimg.reshape(batch, cout, positions).transpose(0, 2, 1).reshape(batch * positions, cout)
    dw = (dflat.T @ cols.reshape(batch * positions, -1)).reshape(w.shape)
    db = dimg.sum(axis=(0, 2, 3))
    dcols = (dflat @ w.reshape(cout, -1)).reshape(batch, out, out, cin, k, k)
    # col2im: k*k strided slice accumulations instead of a scatter
    dx = np.zeros(x_shape)
    for ky in range(k):
        for kx in range(k):
            dx[:, :, ky : ky + out * stride : stride, kx : kx + out * stride : stride] += (
                dcols[:, :, :, :, ky, kx].transpose(0, 3, 1, 2)
            )
    return dw, db, dx


def _encoder_forward(t: dict, prefix: str, x: np.ndarray, n_layers: int):
    acts = [x]
    pre = []
    h = x
    for i in range(n_layers):
        z = h @ t[f"{prefix}_w{i}"].T + t[f"{prefix}_b{i}"]
        pre.append(z)
        h = gelu(z)
        acts.append(h)
    return h, (acts, pre)


def _encoder_backward(t: dict, prefix: str, dh: np.ndarray, cache, grads: dict) -> None:
    acts, pre = cache
    for i in reversed(range(len(pre))):
        dz = dh * gelu_grad(pre[i])
        grads[f"{prefix}_w{i}"] += dz.T @ acts[i]
        grads[f"{prefix}_b{i}"] += dz.sum(axis=0)
        dh = dz @ t[f"{prefix}_w{i}"]


def forward(params: PolicyParams, cur: np.ndarray, nxt: np.ndarray, grid: np.ndarray):
    """Batched forward pass.

    cur, nxt: (B, descriptor_dim); grid: (B, S, S).  Returns
    (mu (B,A), logstd (B,A) clamped, value (B,), cache for backward).
    """
    cfg = params.config
    t = params.tensors
    cur = np.atleast_2d(np.asarray(cur, dtype=float))
    nxt = np.atleast_2d(np.asarray(nxt, dtype=float))
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 2:
        grid = grid[None]
    batch = cur.shape[0]
    if cur.shape[1] != cfg.descriptor_dim or grid.shape[1:] != (cfg.grid_size, cfg.grid_size):
        raise ValueError(
            f"observation shapes {cur.shape}/{grid.shape} do not match config "
            f"({cfg.descriptor_dim}, {cfg.grid_size})"
        )
    n_layers = len(cfg.encoder_widths)
    psi_cur, cache_cur = _encoder_forward(t, "enc_cur", cur, n_layers)
    psi_nxt, cache_nxt = _encoder_forward(t, "enc_nxt", nxt, n_layers)

    conv_cache = None
    if cfg.spatial_encoding:
        x = grid[:, None, :, :]
        imgs, cols_list, pre_list = [x], [], []
        h = x
        for i, stride in enumerate(cfg.conv_strides):
            z, cols = _conv_forward(h, t[f"conv{i}_w"], t[f"conv{i}_b"], stride)
            cols_list.append(cols)
            pre_list.append(z)
            h = gelu(z)
            imgs.append(h)
        flat = h.reshape(batch, -1)
        psi_grid = flat @ t["grid_w"].T + t["grid_b"]
        conv_cache = (imgs, cols_list, pre_list, flat)
    else:
        psi_grid = np.zeros((batch, cfg.grid_embed))

    h_joint = np.concatenate([psi_cur, psi_nxt, psi_grid], axis=1)
    mu = h_joint @ t["mu_w"].T + t["mu_b"]
    logstd_raw = h_joint @ t["logstd_w"].T + t["logstd_b"]
    logstd = np.clip(logstd_raw, cfg.logstd_min, cfg.logstd_max)
    value = (h_joint @ t["value_w"].T + t["value_b"])[:, 0]
    cache = {
        "cur": cache_cur,
        "nxt": cache_nxt,
        "conv": conv_cache,
        "h": h_joint,
        "logstd_raw": logstd_raw,
        "batch": batch,
    }
    return mu, logstd, value, cache


def zero_grads(params: PolicyParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


def backward(
    params: PolicyParams,
    cache: dict,
    dmu: np.ndarray,
    dlogstd: np.ndarray,
    dvalue: np.ndarray,
    value_to_trunk: bool = False,
) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients for every parameter tensor.

    ``value_to_trunk=False`` keeps the value-loss gradient on the critic head
    alone; the trunk then learns only from the policy objective.
    """
    if cache is None:
        raise ValueError("forward cache is required for backward")
    cfg = params.config
    t = params.tensors
    grads = zero_grads(params)
    h = cache["h"]
    dmu = np.atleast_2d(np.asarray(dmu, dtype=float))
    dlogstd = np.atleast_2d(np.asarray(dlogstd, dtype=float))
    dvalue = np.atleast_1d(np.asarray(dvalue, dtype=float))

    # clamp is a hard gate: no gradient where it saturates
    raw = cache["logstd_raw"]
    gate = (raw > cfg.logstd_min) & (raw < cfg.logstd_max)
    dlogstd_raw = dlogstd * gate

    grads["mu_w"] += dmu.T @ h
    grads["mu_b"] += dmu.sum(axis=0)
    grads["logstd_w"] += dlogstd_raw.T @ h
    grads["logstd_b"] += dlogstd_raw.sum(axis=0)
    grads["value_w"] += dvalue[None, :] @ h
    grads["value_b"] += np.array([dvalue.sum()])

    dh = dmu @ t["mu_w"] + dlogstd_raw @ t["logstd_w"]
    if value_to_trunk:
        dh = dh + dvalue[:, None] * t["value_w"]

    w_enc = cfg.encoder_widths[-1]
    d_cur, d_nxt, d_grid = np.split(dh, [w_enc, 2 * w_enc], axis=1)
    _encoder_backward(t, "enc_cur", d_cur, cache["cur"], grads)
    _encoder_backward(t, "enc_nxt", d_nxt, cache["nxt"], grads)

    if cfg.spatial_encoding:
        imgs, cols_list, pre_list, flat = cache["conv"]
        grads["grid_w"] += d_grid.T @ flat
        grads["grid_b"] += d_grid.sum(axis=0)
        dflat = d_grid @ t["grid_w"]
        dimg = dflat.reshape(imgs[-1].shape)
        for i in reversed(range(len(cfg.conv_strides))):
            dimg = dimg * gelu_grad(pre_list[i])
            dw, db, dimg = _conv_backward(dimg, cols_list[i], t[f"conv{i}_w"], imgs[i].shape, cfg.conv_strides[i])
            grads[f"conv{i}_w"] += dw
            grads[f"conv{i}_b"] += db
    return grads


# --- diagonal Gaussian policy ---------------------------------------------------


def sample_action(mu: np.ndarray, logstd: np.ndarray, rng: np.random.Generator):
    """Draw raw actions a = mu + sigma * z and return them with their log densities."""
    sigma = np.exp(logstd)
    raw = mu + sigma * rng.standard_normal(mu.shape)
    return raw, gaussian_logprob(mu, logstd, raw)


def gaussian_logprob(mu: np.ndarray, logstd: np.ndarray, raw: np.ndarray) -> np.ndarray:
    z = (raw - mu) / np.exp(logstd)
    return np.sum(-0.5 * z * z - logstd - 0.5 * LOG_2PI, axis=-1)


def gaussian_entropy(logstd: np.ndarray) -> np.ndarray:
    return np.sum(logstd + 0.5 * (LOG_2PI + 1.0), axis=-1)


def logprob_and_entropy(mu: np.ndarray, logstd: np.ndarray, raw: np.ndarray):
    return gaussian_logprob(mu, logstd, raw), gaussian_entropy(logstd)


def gaussian_logprob_grads(mu: np.ndarray, logstd: np.ndarray, raw: np.ndarray):
    """d logprob / d mu and d logprob / d logstd, elementwise per sample."""
    inv_var = np.exp(-2.0 * logstd)
    diff = raw - mu
    dmu = diff * inv_var
    dlogstd = diff * diff * inv_var - 1.0
    return dmu, dlogstd


# --- Adam ------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    learning_rates: dict[str, float] = field(default_factory=dict)

    @staticmethod
    def for_params(params: PolicyParams, lr: float | dict[str, float]) -> "AdamState":
        rates = {k: (lr[k] if isinstance(lr, dict) else lr) for k in params.tensors}
        return AdamState(
            m={k: np.zeros_like(v) for k, v in params.tensors.items()},
            v={k: np.zeros_like(v) for k, v in params.tensors.items()},
            learning_rates=rates,
        )


def adam_step(params: PolicyParams, grads: dict[str, np.ndarray], state: AdamState) -> PolicyParams:
    """Bias-corrected Adam update, in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, g in grads.items():
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / c1
        v_hat = state.v[name] / c2
        params.tensors[name] -= state.learning_rates[name] * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


# --- checkpoints ------------------------------------------------------------------


def save_checkpoint(path, params: PolicyParams, extra: dict | None = None) -> None:
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    header = json.dumps(
        {"version": CHECKPOINT_VERSION, "config": asdict(params.config), "extra": extra or {}},
        sort_keys=True,
    ).encode("utf-8")
    buf.write(struct.pack("<I", len(header)))
    buf.write(header)
    buf.write(struct.pack("<I", len(params.tensors)))
    for name, tensor in params.tensors.items():
        raw_name = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw_name)))
        buf.write(raw_name)
        buf.write(struct.pack("<B", tensor.ndim))
        for dim in tensor.shape:
            buf.write(struct.pack("<I", dim))
        buf.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[PolicyParams, dict]:
    try:
        blob = open(path, "rb").read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from exc
    view = io.BytesIO(blob)
    if view.read(4) != CHECKPOINT_MAGIC:
        raise CheckpointError("bad checkpoint magic")

    def need(n: int, what: str) -> bytes:
        chunk = view.read(n)
        if len(chunk) != n:
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        return chunk

    (header_len,) = struct.unpack("<I", need(4, "header length"))
    try:
        header = json.loads(need(header_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')!r}")
    raw_cfg = dict(header["config"])
    for key in ("encoder_widths", "conv_channels", "conv_kernels", "conv_strides"):
        raw_cfg[key] = tuple(raw_cfg[key])
    config = NetConfig(**raw_cfg)
    (count,) = struct.unpack("<I", need(4, "tensor count"))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", need(2, "tensor name length"))
        name = need(name_len, "tensor name").decode("utf-8")
        (ndim,) = struct.unpack("<B", need(1, f"tensor '{name}' rank"))
        shape = tuple(struct.unpack("<I", need(4, f"tensor '{name}' shape"))[0] for _ in range(ndim))
        n_items = int(np.prod(shape)) if shape else 1
        payload = need(8 * n_items, f"tensor '{name}' payload")
        arr = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"tensor '{name}' contains non-finite values")
        tensors[name] = arr
    return PolicyParams(config=config, tensors=tensors), header.get("extra", {})
