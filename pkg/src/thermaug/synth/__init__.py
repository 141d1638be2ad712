"""Synthesizer implementations and a small factory keyed by kind name."""

from __future__ import annotations

from .. import checkpoint
from .base import CLASSES, Synthesizer
from .baselines import BaselineSynth
from .vqvae import Codebook, VQAutoencoder, VQConfig, VQSynth, quantize, train_vqvae

KINDS = ("vqvae", "bootstrap", "jitter_scale")


def make_synth(kind: str = "vqvae", **params) -> Synthesizer:
    if kind == "vqvae":
        return VQSynth(VQConfig(**params))
    if kind in ("bootstrap", "jitter_scale"):
        return BaselineSynth(kind, **params)
    raise ValueError(f"unknown synthesizer kind {kind!r}; expected one of {KINDS}")


def load_synth(path) -> Synthesizer:
    if checkpoint.read_kind(path) == "vqvae_synth":
        return VQSynth.load(path)
    return BaselineSynth.load(path)


__all__ = [
    "CLASSES", "KINDS", "BaselineSynth", "Codebook", "Synthesizer", "VQAutoencoder", "VQConfig",
    "VQSynth", "load_synth", "make_synth", "quantize", "train_vqvae",
]
