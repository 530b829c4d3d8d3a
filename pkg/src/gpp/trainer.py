"""Desk-scale training of patch generators.

Two routes produce a usable patch prior:

* ``train_decoder`` fits an encoder/decoder pair on patch reconstruction
  error and keeps the decoder. It is deterministic and has a checkable
  target, which makes it the default for tests and demos.
* ``train_gan`` runs alternating non-saturating GAN updates against a small
  convolutional discriminator.

The encoder ends in Tanh and is remapped to [0, 1], so the decoder learns
on exactly the latent box that recovery later searches.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyDataset
from .imagecore import patch_transform
from .imageio import read_image
from .rng import SplitMix64
from .tensornet import (AdamState, Conv2d, Dense, GeneratorNet, Net, ReLU, Reshape,
                        Tanh, adam_step, generator_layers)


@dataclass
class PatchDataset:
    tau: int
    patches: np.ndarray
    source: str = ""

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.float64).reshape(-1, self.tau ** 2)
        if self.patches.size and (self.patches.min() < 0 or self.patches.max() > 1):
            raise ValueError("patch intensities must lie in [0, 1]")

    def __len__(self):
        return len(self.patches)


def build_dataset(images, tau: int, max_patches: int | None = None, seed: int = 0,
                  pad_mode="replicate") -> PatchDataset:
    """All non-overlapping patches of ``images``, subsampled to ``max_patches``.

    The subsample is drawn without replacement from the seeded stream and kept
    in source order.
    """
    chunks = [patch_transform(img, tau, pad_mode).patches for img in images]
    patches = np.concatenate(chunks) if chunks else np.zeros((0, tau * tau))
    if max_patches is not None and len(patches) > max_patches:
        keep = np.sort(SplitMix64(seed).partial_shuffle(len(patches), max_patches))
        patches = patches[keep]
    return PatchDataset(tau, np.clip(patches, 0.0, 1.0),
                        source=f"{len(chunks)} image(s)")


def load_directory(path, tau: int, max_patches: int | None = None, seed: int = 0) -> PatchDataset:
    """Dataset from every .pgm / .gppi file in ``path`` (sorted by name)."""
    files = sorted(p for p in Path(path).iterdir()
                   if p.suffix.lower() in (".pgm", ".gppi"))
    if not files:
        raise EmptyDataset(f"no .pgm or .gppi images in {path}")
    ds = build_dataset([read_image(f) for f in files], tau, max_patches, seed)
    ds.source = str(path)
    return ds


def synthetic_patches(count: int, tau: int = 16, seed: int = 0) -> np.ndarray:
    """Smooth linear ramps with one or two flat rectangles pasted on top."""
    rng = SplitMix64(seed)
    yy, xx = np.mgrid[0:tau, 0:tau] / max(tau - 1, 1)
    out = np.empty((count, tau, tau))
    for k in range(count):
        base, gy, gx, n_rect = rng.uniform(4)
        img = 0.2 + 0.6 * base + 0.4 * (gy - 0.5) * yy + 0.4 * (gx - 0.5) * xx
        for _ in range(1 + int(n_rect * 2)):
            r0, r1, c0, c1, level = rng.uniform(5)
            top, bottom = sorted((int(r0 * tau), int(r1 * tau) + 1))
            left, right = sorted((int(c0 * tau), int(c1 * tau) + 1))
            img[top:bottom, left:right] = 0.1 + 0.8 * level
        out[k] = np.clip(img, 0.0, 1.0)
    return out.reshape(count, tau * tau)


def synthetic_dataset(count: int = 64, tau: int = 16, seed: int = 0) -> PatchDataset:
    return PatchDataset(tau, synthetic_patches(count, tau, seed), source="synthetic")


def synthetic_image(height: int, width: int, tau: int = 16, seed: int = 0) -> np.ndarray:
    """Tile synthetic patches into a test image."""
    rows, cols = -(-height // tau), -(-width // tau)
    p = synthetic_patches(rows * cols, tau, seed).reshape(rows, cols, tau, tau)
    return p.transpose(0, 2, 1, 3).reshape(rows * tau, cols * tau)[:height, :width].copy()


def encoder_layers(tau: int, latent_dim: int):
    q = tau // 4
    return [Reshape(1, tau, tau), Conv2d(1, 8, 3, 2, 1), ReLU(),
            Conv2d(8, 16, 3, 2, 1), ReLU(), Dense(16 * q * q, latent_dim), Tanh()]


def discriminator_layers(tau: int):
    q = tau // 4
    return [Reshape(1, tau, tau), Conv2d(1, 8, 3, 2, 1), ReLU(),
            Conv2d(8, 16, 3, 2, 1), ReLU(), Dense(16 * q * q, 1)]


@dataclass
class AutoencoderFit:
    decoder: GeneratorNet
    encoder: Net
    losses: list = field(default_factory=list)

    def encode(self, patches) -> np.ndarray:
        t, _ = self.encoder.forward(np.asarray(patches, dtype=np.float64))
        return 0.5 * (t + 1.0)

    def reconstruction_mse(self, patches) -> np.ndarray:
        x = np.asarray(patches, dtype=np.float64)
        rec, _ = self.decoder.run(self.encode(x))
        return np.mean((rec - x) ** 2, axis=1)


def fit_autoencoder(ds: PatchDataset, latent_dim: int = 64, epochs: int = 2000,
                    lr: float = 5e-3, seed: int = 0, std: float = 0.02) -> AutoencoderFit:
    """Full-batch Adam on mean squared reconstruction error."""
    if len(ds) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    decoder = GeneratorNet((latent_dim,), generator_layers(latent_dim, ds.tau),
                           tau_out=ds.tau).init_weights(seed, std)
    encoder = Net((ds.tau ** 2,), encoder_layers(ds.tau, latent_dim))
    encoder.init_weights(seed + 1, std)
    ne = encoder.num_params
    params = np.concatenate([encoder.weights, decoder.weights])
    state = AdamState.zeros_like(params)
    x = ds.patches
    scale = 2.0 / x.size
    losses = []
    for _ in range(epochs):
        we, wd = params[:ne], params[ne:]
        t, etape = encoder.forward(x, we)
        z = 0.5 * (t + 1.0)
        rec, dtape = decoder.run(z, wd)
        diff = rec - x
        losses.append(float(np.mean(diff * diff)))
        gz, gwd = decoder.pullback(dtape, scale * diff, wd)
        _, gwe = encoder.backward(etape, 0.5 * gz, we)
        params = adam_step(state, params, np.concatenate([gwe, gwd]), lr)
    encoder.weights = params[:ne].copy()
    decoder.weights = params[ne:].copy()
    return AutoencoderFit(decoder, encoder, losses)


def train_decoder(ds: PatchDataset, latent_dim: int = 64, epochs: int = 2000,
                  lr: float = 5e-3, seed: int = 0) -> GeneratorNet:
    return fit_autoencoder(ds, latent_dim, epochs, lr, seed).decoder


def _softplus(t):
    return np.logaddexp(0.0, t)


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


@dataclass
class GanFit:
    generator: GeneratorNet
    discriminator: Net
    d_losses: list = field(default_factory=list)
    g_losses: list = field(default_factory=list)


def fit_gan(ds: PatchDataset, latent_dim: int = 64, iterations: int = 1000,
            lr_g: float = 2e-4, lr_d: float = 2e-4, seed: int = 0,
            batch_size: int = 32, std: float = 0.02) -> GanFit:
    """Alternate one discriminator and one generator step per iteration."""
    if len(ds) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    gen = GeneratorNet((latent_dim,), generator_layers(latent_dim, ds.tau),
                       tau_out=ds.tau).init_weights(seed, std)
    disc = Net((ds.tau ** 2,), discriminator_layers(ds.tau)).init_weights(seed + 1, std)
    g_state = AdamState.zeros_like(gen.weights, beta1=0.5)
    d_state = AdamState.zeros_like(disc.weights, beta1=0.5)
    rng = SplitMix64(seed + 2)
    fit = GanFit(gen, disc)
    B = batch_size
    for _ in range(iterations):
        idx = (rng.uniform(B) * len(ds)).astype(np.int64)
        real = ds.patches[idx]
        fake, _ = gen.run(rng.uniform(B * latent_dim).reshape(B, latent_dim))

        lr_out, tape_r = disc.forward(real)
        lf_out, tape_f = disc.forward(fake)
        d_loss = np.mean(_softplus(-lr_out) + _softplus(lf_out))
        _, g_real = disc.backward(tape_r, -_sigmoid(-lr_out) / B)
        _, g_fake = disc.backward(tape_f, _sigmoid(lf_out) / B)
        disc.weights = adam_step(d_state, disc.weights, g_real + g_fake, lr_d)

        z = rng.uniform(B * latent_dim).reshape(B, latent_dim)
        fake, gtape = gen.run(z)
        logits, dtape = disc.forward(fake)
        g_loss = np.mean(_softplus(-logits))
        gx, _ = disc.backward(dtape, -_sigmoid(-logits) / B, need_params=False)
        _, gw = gen.pullback(gtape, gx.reshape(B, -1))
        gen.weights = adam_step(g_state, gen.weights, gw, lr_g)

        fit.d_losses.append(float(d_loss))
        fit.g_losses.append(float(g_loss))
    return fit


def train_gan(ds: PatchDataset, latent_dim: int = 64, iterations: int = 1000,
              lr_g: float = 2e-4, lr_d: float = 2e-4, seed: int = 0) -> GeneratorNet:
    return fit_gan(ds, latent_dim, iterations, lr_g, lr_d, seed).generator


def moment_distance(a, b) -> float:
    """Squared distance between per-pixel means plus between per-pixel stds."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.sum((a.mean(0) - b.mean(0)) ** 2) + np.sum((a.std(0) - b.std(0)) ** 2))
