"""Vector-quantized autoencoder for 240-sample series, with a learned token prior.

Encoder: strided conv (kernel 2*ds, stride ds) then two pointwise-ish convs,
mapping (240, 1) to (240 / ds, d) latents. Decoder mirrors it and ends in a
transposed conv back to (240, 1). Latents snap to the nearest codebook
vector; gradients pass straight through the snap. The codebook is updated
by exponential moving averages of the assigned encoder outputs, and codes
that fall out of use are re-seeded from current encoder outputs.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import checkpoint
from .._kernels.vq import nearest_code
from ..dataio import SERIES_LENGTH
from ..errors import CodebookCollapse, NonFiniteLoss, UnknownClass
from ..nn import Adam, Conv1d, ConvTranspose1d, minibatches, relu
from .base import CLASSES, Synthesizer, check_training_data
from .prior import NULL_CLASS, PARAM_ORDER as PRIOR_ORDER, TokenPrior


@dataclass(frozen=True)
class VQConfig:
    codebook_size: int = 64
    code_dim: int = 32
    hidden: int = 64
    downsample: int = 8
    beta: float = 0.25
    ema_decay: float = 0.99
    dead_threshold: float = 0.03
    lr: float = 3e-3
    lr_final: float = 0.05  # cosine decay of the learning rate to lr * lr_final
    batch_size: int = 16
    vq_epochs: int = 1200
    prior_epochs: int = 6000
    prior_embed: int = 32
    prior_hidden: int = 64
    prior_lr: float = 3e-3
    prior_batch_size: int = 32
    slope_weight: float = 30.0  # weight of the first-difference matching term
    refine_channels: int = 16  # full-resolution conv stage after upsampling; 0 disables

    @property
    def n_tokens(self) -> int:
        return SERIES_LENGTH // self.downsample

    @classmethod
    def from_dict(cls, d: dict | None) -> "VQConfig":
        return cls(**(d or {}))


def build_stacks(cfg: VQConfig):
    ds, h, d = cfg.downsample, cfg.hidden, cfg.code_dim
    if SERIES_LENGTH % ds or ds % 2:
        raise ValueError("downsample must be even and divide 240")
    encoder = [
        ("enc0", Conv1d(1, h, 2 * ds, ds, ds // 2), True),
        ("enc1", Conv1d(h, h, 3, 1, 1), True),
        ("enc2", Conv1d(h, d, 1), False),
    ]
    decoder = [
        ("dec0", Conv1d(d, h, 3, 1, 1), True),
        ("dec1", Conv1d(h, h, 3, 1, 1), True),
    ]
    r = cfg.refine_channels
    if r:
        decoder += [
            ("dec2", ConvTranspose1d(h, r, 2 * ds, ds, ds // 2), True),
            ("dec3", Conv1d(r, 1, 5, 1, 2), False),
        ]
    else:
        decoder.append(("dec2", ConvTranspose1d(h, 1, 2 * ds, ds, ds // 2), False))
    return encoder, decoder


def run_stack(stack, params, x):
    caches = []
    for name, layer, act in stack:
        x, cache = layer.forward(params, name, x)
        mask = None
        if act:
            mask = x > 0
            x = x * mask
        caches.append((cache, mask))
    return x, caches


def back_stack(stack, params, dy, caches, grads):
    for (name, layer, _), (cache, mask) in zip(reversed(stack), reversed(caches)):
        if mask is not None:
            dy = dy * mask
        dy, g = layer.backward(params, name, dy, cache)
        grads.update(g)
    return dy


@dataclass
class Codebook:
    codes: np.ndarray  # (K, d)
    ema_count: np.ndarray  # (K,)
    ema_sum: np.ndarray  # (K, d)
    decay: float = 0.99

    @classmethod
    def from_vectors(cls, vectors, decay: float) -> "Codebook":
        v = np.array(vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValueError("a codebook needs K >= 2 vectors")
        return cls(v, np.ones(v.shape[0]), v.copy(), decay)

    @property
    def size(self) -> int:
        return self.codes.shape[0]

    def quantize(self, z):
        idx, dist = nearest_code(np.ascontiguousarray(z), np.ascontiguousarray(self.codes))
        return idx, self.codes[idx], dist

    def ema_update(self, z, idx) -> None:
        g = self.decay
        counts = np.bincount(idx, minlength=self.size).astype(np.float64)
        sums = np.zeros_like(self.ema_sum)
        np.add.at(sums, idx, z)
        self.ema_count = g * self.ema_count + (1.0 - g) * counts
        self.ema_sum = g * self.ema_sum + (1.0 - g) * sums
        live = self.ema_count > 1e-12
        self.codes[live] = self.ema_sum[live] / self.ema_count[live, None]

    def restart_dead(self, z, threshold: float, rng) -> int:
        dead = np.flatnonzero(self.ema_count < threshold)
        if dead.size == 0 or z.shape[0] == 0:
            return 0
        pick = z[rng.integers(z.shape[0], size=dead.size)]
        self.codes[dead] = pick
        self.ema_sum[dead] = pick
        self.ema_count[dead] = 1.0
        return int(dead.size)


def quantize(z, codebook: Codebook):
    """Nearest code for a single latent vector: (0-based index, code vector)."""
    idx, q, _ = codebook.quantize(np.asarray(z, dtype=np.float64)[None, :])
    return int(idx[0]), q[0]


class VQAutoencoder:
    def __init__(self, cfg: VQConfig, params: dict | None = None, codebook: Codebook | None = None):
        self.cfg = cfg
        self.encoder, self.decoder = build_stacks(cfg)
        self.params = params
        self.codebook = codebook
        self.recon_history: list[float] = []
        self.codes_used = 0

    def init(self, rng) -> None:
        params = {}
        for name, layer, _ in self.encoder + self.decoder:
            params.update(layer.init(rng, name))
        self.params = params

    def encode(self, x):
        z, _ = run_stack(self.encoder, self.params, np.asarray(x, dtype=np.float64)[:, :, None])
        return z  # (B, T, d)

    def decode(self, zq):
        y, _ = run_stack(self.decoder, self.params, zq)
        return y[:, :, 0]

    def tokens(self, x) -> np.ndarray:
        z = self.encode(x)
        B, T, d = z.shape
        idx, _, _ = self.codebook.quantize(z.reshape(-1, d))
        return idx.reshape(B, T)

    def decode_tokens(self, tokens) -> np.ndarray:
        return self.decode(self.codebook.codes[np.asarray(tokens)])

    def reconstruct(self, x, quantized: bool = True) -> np.ndarray:
        z = self.encode(x)
        if quantized:
            B, T, d = z.shape
            _, q, _ = self.codebook.quantize(z.reshape(-1, d))
            z = q.reshape(B, T, d)
        return self.decode(z)

    def loss_and_grads(self, x, quantized: bool = True):
        """Reconstruction MSE + beta * commitment, with straight-through gradients.

        With ``quantized=False`` the snap is skipped (identity), which makes
        the loss a smooth function of the parameters for gradient checks.
        """
        params = self.params
        z, enc_caches = run_stack(self.encoder, params, x[:, :, None])
        B, T, d = z.shape
        zf = z.reshape(-1, d)
        if quantized:
            idx, qf, _ = self.codebook.quantize(zf)
        else:
            idx, qf = None, zf
        zq = qf.reshape(B, T, d)
        y, dec_caches = run_stack(self.decoder, params, zq)
        diff = y[:, :, 0] - x
        recon = float(np.mean(diff * diff))
        commit = float(np.mean((zf - qf) ** 2))
        loss = recon + self.cfg.beta * commit
        grads: dict = {}
        dy = 2.0 * diff / diff.size
        lam = self.cfg.slope_weight
        if lam:
            dd = np.diff(diff, axis=1)
            loss += lam * float(np.mean(dd * dd))
            g = (2.0 * lam / dd.size) * dd
            dy[:, :-1] -= g
            dy[:, 1:] += g
        dy = dy[:, :, None]
        dzq = back_stack(self.decoder, params, dy, dec_caches, grads)
        dz = dzq + (2.0 * self.cfg.beta / zf.size) * (z - zq)
        back_stack(self.encoder, params, dz, enc_caches, grads)
        return loss, recon, grads, zf, idx


def train_vqvae(x, cfg: VQConfig | None = None, seed: int = 0) -> VQAutoencoder:
    """Fit encoder, decoder and codebook on scaled series ``x`` of shape (n, 240)."""
    cfg = cfg or VQConfig()
    x, _ = check_training_data(x, None, min_series=8)
    rng = np.random.default_rng(seed)
    model = VQAutoencoder(cfg)
    model.init(rng)
    z0 = model.encode(x[rng.permutation(x.shape[0])[: max(cfg.batch_size, 1)]]).reshape(-1, cfg.code_dim)
    pick = rng.choice(z0.shape[0], size=cfg.codebook_size, replace=z0.shape[0] < cfg.codebook_size)
    model.codebook = Codebook.from_vectors(z0[pick], cfg.ema_decay)

    opt = Adam(model.params, lr=cfg.lr)
    for epoch in range(cfg.vq_epochs):
        frac = epoch / max(cfg.vq_epochs - 1, 1)
        opt.lr = cfg.lr * (cfg.lr_final + (1.0 - cfg.lr_final) * 0.5 * (1.0 + np.cos(np.pi * frac)))
        total = 0.0
        zf = None
        for idx in minibatches(rng, x.shape[0], cfg.batch_size):
            loss, recon, grads, zf, codes = model.loss_and_grads(x[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"VQ loss became {loss} at epoch {epoch}")
            opt.step(grads)
            model.codebook.ema_update(zf, codes)
            total += recon * idx.size
        model.recon_history.append(total / x.shape[0])
        if cfg.ema_decay < 1.0 and epoch < cfg.vq_epochs - 1:
            model.codebook.restart_dead(zf, cfg.dead_threshold, rng)

    model.codes_used = int(np.unique(model.tokens(x)).size)
    if model.codes_used < 2:
        warnings.warn(f"only {model.codes_used} codebook entry in use after training", CodebookCollapse)
    return model


class VQSynth(Synthesizer):
    """Two-stage synthesizer: VQ autoencoder, then a token prior.

    Unconditional draws pick a class from the training label frequencies and
    sample conditionally; without training labels they use the null class.
    """

    kind = "vqvae"

    def __init__(self, cfg: VQConfig | None = None):
        self.cfg = cfg or VQConfig()
        self.autoencoder: VQAutoencoder | None = None
        self.prior: TokenPrior | None = None
        self.class_freq: np.ndarray | None = None  # (3,), or None when unlabeled

    @property
    def fitted(self) -> bool:
        return self.autoencoder is not None and self.prior is not None and self.prior.params is not None

    def fit(self, x, labels=None, seed: int = 0) -> "VQSynth":
        x, labels = check_training_data(x, labels, min_series=8)
        self.autoencoder = train_vqvae(x, self.cfg, seed)
        self.train_prior(x, labels, seed)
        return self

    def train_prior(self, x, labels=None, seed: int = 0) -> "VQSynth":
        x, labels = check_training_data(x, labels)
        tokens = self.autoencoder.tokens(x)
        if labels is None:
            conds = np.full(x.shape[0], NULL_CLASS)
            self.class_freq = None
        else:
            conds = labels
            self.class_freq = np.bincount(labels, minlength=len(CLASSES)) / labels.size
        cfg = self.cfg
        self.prior = TokenPrior(cfg.codebook_size, cfg.n_tokens, cfg.prior_embed, cfg.prior_hidden)
        self.prior.fit(tokens, conds, cfg.prior_epochs, cfg.prior_batch_size, cfg.prior_lr, seed + 1)
        return self

    def _conditions(self, n, cls, rng):
        if cls is None:
            if self.class_freq is None:
                return np.full(n, NULL_CLASS)
            return rng.choice(len(CLASSES), size=n, p=self.class_freq)
        if self.class_freq is None or self.class_freq[cls] == 0:
            raise UnknownClass(f"no training series of class {cls}")
        return np.full(n, cls)

    def _sample(self, n, cls, rng):
        conds = self._conditions(n, cls, rng)
        tokens = self.prior.sample(conds, rng)
        return self.autoencoder.decode_tokens(tokens)

    def save(self, path) -> None:
        ae, cb, pr = self.autoencoder, self.autoencoder.codebook, self.prior
        arrays = {f"ae.{k}": ae.params[k] for k in sorted(ae.params)}
        arrays.update({"codebook.codes": cb.codes, "codebook.ema_count": cb.ema_count, "codebook.ema_sum": cb.ema_sum})
        arrays.update({f"prior.{k}": pr.params[k] for k in PRIOR_ORDER})
        if self.class_freq is not None:
            arrays["class_freq"] = self.class_freq
        meta = {
            "K": self.cfg.codebook_size,
            "d": self.cfg.code_dim,
            "T": self.cfg.n_tokens,
            "layer_shapes": {k: list(v.shape) for k, v in arrays.items()},
            "config": asdict(self.cfg),
            "codes_used": ae.codes_used,
        }
        checkpoint.save(path, "vqvae_synth", meta, arrays)

    @classmethod
    def load(cls, path) -> "VQSynth":
        meta, arrays = checkpoint.load(path, "vqvae_synth")
        cfg = VQConfig.from_dict(meta["config"])
        self = cls(cfg)
        params = {k[3:]: v for k, v in arrays.items() if k.startswith("ae.")}
        cb = Codebook(arrays["codebook.codes"], arrays["codebook.ema_count"], arrays["codebook.ema_sum"], cfg.ema_decay)
        self.autoencoder = VQAutoencoder(cfg, params, cb)
        self.autoencoder.codes_used = meta.get("codes_used", 0)
        prior_params = {k[6:]: arrays[k] for k in arrays if k.startswith("prior.")}
        self.prior = TokenPrior(cfg.codebook_size, cfg.n_tokens, cfg.prior_embed, cfg.prior_hidden, prior_params)
        self.class_freq = arrays.get("class_freq")
        return self
