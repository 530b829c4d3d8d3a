"""Training a patch prior on a small corpus.

The decoder route fits an autoencoder and keeps the decoder. The GAN route
trains against a small discriminator and is shown for a handful of steps.
"""

# %% Setup
import numpy as np

from gpp.trainer import fit_autoencoder, fit_gan, moment_distance, synthetic_dataset

ds = synthetic_dataset(32, 16, seed=0)

# %% Decoder: reconstruction error falls steadily.
fit = fit_autoencoder(ds, latent_dim=32, epochs=300, lr=5e-3, seed=0)
for e in (0, 50, 100, 200, 299):
    print(f"epoch {e:4d}  mse {fit.losses[e]:.5f}")
print(f"held-out mse {fit.reconstruction_mse(synthetic_dataset(16, 16, seed=9).patches).mean():.5f}")

# %% GAN: a short run, tracked by per-pixel moment distance to the data.
gan = fit_gan(ds, latent_dim=32, iterations=25, seed=0)
samples = gan.generator.run(np.random.default_rng(0).uniform(size=(64, 32)))[0]
print(f"gan d_loss {gan.d_losses[-1]:.3f}  g_loss {gan.g_losses[-1]:.3f}  "
      f"moment distance {moment_distance(samples, ds.patches):.3f}")
