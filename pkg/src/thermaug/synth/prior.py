"""Class-conditional autoregressive prior over codebook token sequences.

An LSTM reads ``[start, tok_0, ..., tok_{T-2}]`` and predicts ``tok_0 ..
tok_{T-1}``. The start token encodes the condition: ids K..K+2 are the
three trend classes and K+3 means "no class".
"""

from __future__ import annotations

import numpy as np

from .._kernels.lstm import lstm_backward, lstm_forward
from ..errors import NonFiniteLoss
from ..nn import Adam, minibatches, softmax, uniform_init

NULL_CLASS = 3
N_CONDITIONS = 4
PARAM_ORDER = ("emb", "wx", "wh", "b", "w_out", "b_out")


class TokenPrior:
    def __init__(self, n_codes: int, seq_len: int, embed: int = 32, hidden: int = 64, params: dict | None = None):
        self.n_codes = n_codes
        self.seq_len = seq_len
        self.embed = embed
        self.hidden = hidden
        self.params = params
        self.loss_history: list[float] = []

    @property
    def vocab(self) -> int:
        return self.n_codes + N_CONDITIONS

    def init(self, rng) -> None:
        E, H, K = self.embed, self.hidden, self.n_codes
        self.params = {
            "emb": rng.normal(0.0, 1.0, size=(self.vocab, E)),
            "wx": uniform_init(rng, (E, 4 * H), H),
            "wh": uniform_init(rng, (H, 4 * H), H),
            "b": uniform_init(rng, (4 * H,), H),
            "w_out": uniform_init(rng, (H, K), H),
            "b_out": uniform_init(rng, (K,), H),
        }

    def _inputs(self, tokens, conds):
        start = self.n_codes + np.asarray(conds, dtype=np.int64)
        return np.concatenate([start[:, None], tokens[:, :-1]], axis=1)  # (B, T)

    def _forward(self, tokens, conds):
        p = self.params
        inp = self._inputs(tokens, conds).T  # (T, B)
        x = np.ascontiguousarray(p["emb"][inp])
        B = tokens.shape[0]
        h0 = np.zeros((B, self.hidden))
        hs, cs, gates = lstm_forward(x, p["wx"], np.ascontiguousarray(p["wh"]), p["b"], h0, h0)
        logits = hs @ p["w_out"] + p["b_out"]  # (T, B, K)
        return logits, (inp, x, h0, hs, cs, gates)

    def loss_and_grads(self, tokens, conds):
        """Mean next-token cross-entropy (nats) and its gradient."""
        p = self.params
        logits, (inp, x, h0, hs, cs, gates) = self._forward(tokens, conds)
        probs = softmax(logits)
        T, B, K = probs.shape
        tgt = tokens.T
        ti, bi = np.meshgrid(np.arange(T), np.arange(B), indexing="ij")
        picked = probs[ti, bi, tgt]
        loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
        dlogits = probs
        dlogits[ti, bi, tgt] -= 1.0
        dlogits /= T * B
        grads = {
            "w_out": hs.reshape(-1, self.hidden).T @ dlogits.reshape(-1, K),
            "b_out": dlogits.sum(axis=(0, 1)),
        }
        dhs = dlogits @ p["w_out"].T
        dx, grads["wx"], grads["wh"], grads["b"] = lstm_backward(
            dhs, x, p["wx"], np.ascontiguousarray(p["wh"]), h0, h0, hs, cs, gates)
        demb = np.zeros_like(p["emb"])
        np.add.at(demb, inp.ravel(), dx.reshape(-1, self.embed))
        grads["emb"] = demb
        return loss, grads

    def fit(self, tokens, conds, epochs: int, batch_size: int = 32, lr: float = 3e-3, seed: int = 0) -> "TokenPrior":
        tokens = np.asarray(tokens, dtype=np.int64)
        conds = np.asarray(conds, dtype=np.int64)
        rng = np.random.default_rng(seed)
        if self.params is None:
            self.init(rng)
        opt = Adam(self.params, lr=lr)
        n = tokens.shape[0]
        for epoch in range(epochs):
            total = 0.0
            for idx in minibatches(rng, n, batch_size):
                loss, grads = self.loss_and_grads(tokens[idx], conds[idx])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"prior loss became {loss} at epoch {epoch}")
                opt.step(grads)
                total += loss * idx.size
            self.loss_history.append(total / n)
        return self

    def distributions(self, tokens, conds) -> np.ndarray:
        """Teacher-forced next-token distributions, (B, T, K)."""
        logits, _ = self._forward(np.asarray(tokens, dtype=np.int64), conds)
        return softmax(logits).transpose(1, 0, 2)

    def log_prob(self, tokens, conds) -> np.ndarray:
        tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
        probs = self.distributions(tokens, conds)
        B, T, _ = probs.shape
        picked = probs[np.arange(B)[:, None], np.arange(T)[None, :], tokens]
        return np.log(picked).sum(axis=1)

    def sample(self, conds, rng) -> np.ndarray:
        p = self.params
        conds = np.asarray(conds, dtype=np.int64)
        n = conds.size
        out = np.empty((n, self.seq_len), dtype=np.int64)
        h = np.zeros((n, self.hidden))
        c = np.zeros((n, self.hidden))
        tok = self.n_codes + conds
        wh = np.ascontiguousarray(p["wh"])
        for t in range(self.seq_len):
            x = np.ascontiguousarray(p["emb"][tok][None])
            hs, cs, _ = lstm_forward(x, p["wx"], wh, p["b"], h, c)
            h, c = hs[0], cs[0]
            probs = softmax(h @ p["w_out"] + p["b_out"])
            cdf = np.cumsum(probs, axis=1)
            u = rng.random(n)[:, None] * cdf[:, -1:]
            tok = np.minimum((cdf < u).sum(axis=1), self.n_codes - 1)
            out[:, t] = tok
        return out
