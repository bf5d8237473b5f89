"""Channel-independent patch transformer with a global-token bridge to exogenous tokens.

Per endogenous channel: instance-normalize, split into patches, embed, append
the shared global token, run the encoder blocks, flatten and project to the
horizon, then restore the channel's scale. Exogenous variates (whitened when
a whitener is supplied) are embedded one token per variate and reach the
patch tokens only through the global token's cross-attention.
"""

from __future__ import annotations

import io
import json
import math
from pathlib import Path

import numpy as np

from . import tws as tws_mod
from .config import ConfigError, RunConfig
from .data import ForecastSample, denormalize, instance_normalize
from .tensor import (
    Tensor,
    affine,
    broadcast_to,
    concat,
    dropout,
    gelu,
    layer_norm,
    scale,
    softmax,
)

CHECKPOINT_VERSION = 1
LN_EPS = 1e-5


def create_patches(x: np.ndarray, patch_len: int) -> np.ndarray:
    """Split the last axis into non-overlapping patches: (..., L) -> (..., L // P, P)."""
    x = np.asarray(x)
    length = x.shape[-1]
    if length % patch_len:
        raise ConfigError(f"length {length} is not divisible by patch length {patch_len}")
    return x.reshape(*x.shape[:-1], length // patch_len, patch_len)


def init_params(config: RunConfig) -> dict[str, Tensor]:
    rng = np.random.default_rng(config.seed)
    d, hidden = config.d_model, config.ffn_mult * config.d_model
    params: dict[str, Tensor] = {}

    def linear(name: str, fan_in: int, fan_out: int) -> None:
        bound = 1.0 / math.sqrt(fan_in)
        params[f"{name}.weight"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"{name}.bias"] = np.zeros(fan_out)

    def norm(name: str) -> None:
        params[f"{name}.gain"] = np.ones(d)
        params[f"{name}.bias"] = np.zeros(d)

    linear("patch_embed", config.patch_len, d)
    linear("exo_embed", config.exo_lookback, d)
    cross = config.bridging == "cross"
    if cross:
        params["global_token"] = rng.normal(0.0, 0.02, size=(1, 1, d))
    for i in range(config.blocks):
        b = f"blocks.{i}"
        for proj in "qkvo":
            linear(f"{b}.self_attn.{proj}", d, d)
        norm(f"{b}.norm_self")
        if cross:
            for proj in "qkvo":
                linear(f"{b}.cross_attn.{proj}", d, d)
            norm(f"{b}.norm_cross")
        linear(f"{b}.conv1", d, hidden)
        linear(f"{b}.conv2", hidden, d)
        norm(f"{b}.norm_conv")
    tokens = config.n_patches + (1 if cross else 0)
    linear("head", tokens * d, config.horizon)
    return {name: Tensor(arr, requires_grad=True, name=name) for name, arr in params.items()}


def linear(x: Tensor, params: dict[str, Tensor], name: str) -> Tensor:
    return affine(x, params[f"{name}.weight"], params[f"{name}.bias"])


def norm(x: Tensor, params: dict[str, Tensor], name: str) -> Tensor:
    return layer_norm(x, params[f"{name}.gain"], params[f"{name}.bias"], LN_EPS)


def attention(xq: Tensor, xkv: Tensor, params: dict[str, Tensor], name: str, heads: int):
    """Multi-head scaled dot-product attention; returns (output, weights)."""
    b, sq, d = xq.shape
    sk = xkv.shape[1]
    dh = d // heads
    q = linear(xq, params, f"{name}.q").reshape(b, sq, heads, dh).transpose(0, 2, 1, 3)
    k = linear(xkv, params, f"{name}.k").reshape(b, sk, heads, dh).transpose(0, 2, 3, 1)
    v = linear(xkv, params, f"{name}.v").reshape(b, sk, heads, dh).transpose(0, 2, 1, 3)
    weights = softmax(scale(q @ k, 1.0 / math.sqrt(dh)), axis=-1)
    out = (weights @ v).transpose(0, 2, 1, 3).reshape(b, sq, d)
    return linear(out, params, f"{name}.o"), weights


class Forecaster:
    """Model parameters plus the forward pass.

    ``whitener`` must be given exactly when ``config.tws_enabled`` is set.
    """

    def __init__(self, config: RunConfig, whitener: tws_mod.TwsWhitener | None = None,
                 params: dict[str, Tensor] | None = None):
        if config.tws_enabled and whitener is None:
            raise ConfigError("tws_enabled needs a fitted whitener")
        if not config.tws_enabled and whitener is not None:
            raise ConfigError("a whitener was supplied but tws_enabled is off")
        self.config = config
        self.whitener = whitener
        self.params = params if params is not None else init_params(config)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        expected = {k: v.shape for k, v in self.params.items()}
        got = {k: tuple(np.shape(v)) for k, v in state.items()}
        if set(expected) != set(got):
            missing, extra = set(expected) - set(got), set(got) - set(expected)
            raise ValueError(f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, shape in expected.items():
            if got[k] != shape:
                raise ValueError(f"parameter {k}: checkpoint shape {got[k]} != model shape {shape}")
        for k, arr in state.items():
            self.params[k].data = np.array(arr, dtype=np.float64)

    # forward -------------------------------------------------------------

    def prepare_exogenous(self, exo: np.ndarray) -> np.ndarray:
        """Raw exogenous windows -> (whitened) -> instance-normalized."""
        if self.whitener is not None:
            exo = tws_mod.whiten_window(self.whitener, exo)
        normed, _ = instance_normalize(exo)
        return normed

    def forward(self, endo: np.ndarray, exo: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None, trace: dict | None = None) -> Tensor:
        """Predict (B, C, H) from endogenous (B, C, L) and exogenous (B, N, L_ex) windows."""
        cfg, p = self.config, self.params
        endo = np.asarray(endo, dtype=np.float64)
        exo = np.asarray(exo, dtype=np.float64)
        if endo.ndim != 3 or endo.shape[-1] != cfg.lookback:
            raise ConfigError(f"endogenous batch must be (B, C, {cfg.lookback}), got {endo.shape}")
        if exo.ndim != 3 or exo.shape[0] != endo.shape[0] or exo.shape[-1] != cfg.exo_lookback:
            raise ConfigError(f"exogenous batch must be (B, N, {cfg.exo_lookback}), got {exo.shape}")
        if self.whitener is not None and exo.shape[1] != self.whitener.n_features:
            raise ConfigError(f"exogenous has {exo.shape[1]} variates, whitener expects {self.whitener.n_features}")
        batch, chans, _ = endo.shape
        bc, d = batch * chans, cfg.d_model
        drop = cfg.dropout

        x_norm, state = instance_normalize(endo)
        patches = Tensor(create_patches(x_norm, cfg.patch_len).reshape(bc, cfg.n_patches, cfg.patch_len))
        z = linear(patches, p, "patch_embed")  # (BC, N_en, D)

        exo_in = self.prepare_exogenous(exo)
        h_ex = linear(Tensor(exo_in), p, "exo_embed")  # (B, N, D)
        n_exo = h_ex.shape[1]
        if trace is not None:
            trace["exo_input"] = exo_in
            trace["exo_tokens"] = h_ex.data.copy()
            trace.setdefault("self_weights", [])
            trace.setdefault("cross_weights", [])

        cross = cfg.bridging == "cross"
        if cross:
            phi = broadcast_to(p["global_token"], (bc, 1, d))
            tokens = concat([z, phi], axis=1)
        else:
            shared = broadcast_to(h_ex.reshape(batch, 1, n_exo, d), (batch, chans, n_exo, d))
            tokens = concat([z, shared.reshape(bc, n_exo, d)], axis=1)

        for i in range(cfg.blocks):
            blk = f"blocks.{i}"
            attn, w_self = attention(tokens, tokens, p, f"{blk}.self_attn", cfg.heads)
            tokens = norm(tokens + dropout(attn, drop, rng, training), p, f"{blk}.norm_self")
            if trace is not None:
                trace["self_weights"].append(w_self.data.copy())
            if cross:
                n_tok = tokens.shape[1]
                phi = tokens[:, n_tok - 1:, :].reshape(batch, chans, d)
                bridged, w_cross = attention(phi, h_ex, p, f"{blk}.cross_attn", cfg.heads)
                phi = norm(phi + dropout(bridged, drop, rng, training), p, f"{blk}.norm_cross")
                tokens = concat([tokens[:, : n_tok - 1, :], phi.reshape(bc, 1, d)], axis=1)
                if trace is not None:
                    trace["cross_weights"].append(w_cross.data.copy())
            ff = linear(gelu(linear(tokens, p, f"{blk}.conv1")), p, f"{blk}.conv2")
            tokens = norm(tokens + dropout(ff, drop, rng, training), p, f"{blk}.norm_conv")

        if not cross:
            tokens = tokens[:, : cfg.n_patches, :]
        flat = tokens.reshape(bc, tokens.shape[1] * d)
        pred = linear(flat, p, "head").reshape(batch, chans, cfg.horizon)
        return denormalize(pred, state)

    __call__ = forward

    def predict(self, sample: ForecastSample) -> np.ndarray:
        """Eval-mode (C, H) forecast for one sample."""
        out = self.forward(sample.endogenous[None], sample.exogenous[None])
        return out.data[0]


# checkpoints -----------------------------------------------------------------


def save_checkpoint(model: Forecaster, path: str | Path, whitener_ref: str | None = None,
                    extra: dict | None = None) -> None:
    meta = {
        "format": "tws-forecaster",
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "shapes": {k: list(v.shape) for k, v in model.params.items()},
        "whitener_ref": whitener_ref,
        "whitener": tws_mod.to_dict(model.whitener) if model.whitener is not None else None,
        "extra": extra or {},
    }
    arrays = {f"param/{k}": v for k, v in model.state_dict().items()}
    buf = io.BytesIO()
    np.savez(buf, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[Forecaster, dict]:
    with np.load(Path(path), allow_pickle=False) as npz:
        if "__meta__" not in npz:
            raise ValueError(f"{path} is not a forecaster checkpoint")
        meta = json.loads(str(npz["__meta__"]))
        if meta.get("format") != "tws-forecaster" or meta.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint format in {path}")
        state = {k[len("param/"):]: npz[k] for k in npz.files if k.startswith("param/")}
    config = RunConfig.from_dict(meta["config"])
    whitener = tws_mod.from_dict(meta["whitener"]) if meta["whitener"] is not None else None
    model = Forecaster(config, whitener)
    for name, shape in meta["shapes"].items():
        if name in state and list(state[name].shape) != shape:
            raise ValueError(f"checkpoint array {name} has shape {state[name].shape}, header says {shape}")
    model.load_state_dict(state)
    return model, meta
