import numpy as np
import pytest

from conftest import window_ratios
from gpp.errors import EmptyDataset
from gpp.imageio import write_image
from gpp.rng import SplitMix64
from gpp.tensornet import make_generator
from gpp.trainer import (PatchDataset, build_dataset, fit_autoencoder, fit_gan, load_directory,
                         moment_distance, synthetic_dataset, synthetic_image, synthetic_patches,
                         train_decoder, train_gan)


def test_build_dataset_examples(rng):
    assert len(build_dataset([rng.random((32, 32))], 32)) == 1
    big = rng.random((256, 256))
    ds = build_dataset([big], 32, max_patches=64, seed=1)
    assert len(ds) == 64 and ds.patches.shape == (64, 1024)
    a = build_dataset([big], 32, max_patches=10, seed=5)
    b = build_dataset([big], 32, max_patches=10, seed=5)
    assert np.array_equal(a.patches, b.patches)
    assert not np.array_equal(a.patches, build_dataset([big], 32, 10, seed=6).patches)


def test_build_dataset_pads_odd_sizes(rng):
    assert len(build_dataset([rng.random((20, 17))], 8)) == 9


def test_dataset_rejects_out_of_range():
    with pytest.raises(ValueError):
        PatchDataset(2, np.full((1, 4), 1.5))


def test_load_directory(tmp_path, rng):
    with pytest.raises(EmptyDataset):
        load_directory(tmp_path, 16)
    write_image(tmp_path / "b.pgm", rng.random((16, 32)))
    write_image(tmp_path / "a.gppi", rng.random((16, 16)))
    (tmp_path / "notes.txt").write_text("ignored")
    ds = load_directory(tmp_path, 16)
    assert len(ds) == 3 and ds.source == str(tmp_path)


def test_synthetic_corpus():
    p = synthetic_patches(64, 16, 0)
    assert p.shape == (64, 256) and p.min() >= 0 and p.max() <= 1
    assert np.array_equal(p, synthetic_patches(64, 16, 0))
    assert synthetic_image(40, 24, 16, 1).shape == (40, 24)


def test_empty_dataset_errors():
    empty = PatchDataset(16, np.zeros((0, 256)))
    with pytest.raises(EmptyDataset):
        train_decoder(empty, epochs=1)
    with pytest.raises(EmptyDataset):
        train_gan(empty, iterations=1)


def test_decoder_overfits_one_patch():
    ds = synthetic_dataset(1, 16, 0)
    fit = fit_autoencoder(ds, 64, 500, 5e-3, 0)
    assert fit.reconstruction_mse(ds.patches)[0] < 1e-3


def test_decoder_lr_zero_keeps_init():
    ds = synthetic_dataset(4, 16, 0)
    net = train_decoder(ds, latent_dim=8, epochs=5, lr=0.0, seed=3)
    assert np.array_equal(net.weights, make_generator(8, 16, seed=3, std=0.02).weights)


def test_decoder_deterministic():
    ds = synthetic_dataset(4, 16, 2)
    a = train_decoder(ds, latent_dim=8, epochs=20, seed=1)
    b = train_decoder(ds, latent_dim=8, epochs=20, seed=1)
    assert np.array_equal(a.weights, b.weights)


def test_decoder_outputs_in_range_at_checkpoints():
    ds = synthetic_dataset(8, 16, 4)
    z = SplitMix64(0).uniform(32 * 8).reshape(32, 8)
    for epochs in (0, 10, 50):
        out, _ = train_decoder(ds, latent_dim=8, epochs=epochs, seed=0).run(z)
        assert out.min() >= 0 and out.max() <= 1


def test_decoder_loss_windows_smaller_run():
    fit = fit_autoencoder(synthetic_dataset(16, 16, 3), 16, 300, 1e-3, 0)
    assert window_ratios(fit.losses).max() <= 1.05


@pytest.mark.xfail(strict=True, reason="full-batch Adam at lr 5e-3 has late loss spikes "
                   "well above the 5% window allowance; see the decisions ledger")
def test_decoder_loss_windows_default_run(corpus_fit):
    _, fit = corpus_fit
    assert window_ratios(fit.losses).max() <= 1.05


def test_gan_properties():
    ds = synthetic_dataset(64, 16, 0)
    fit = fit_gan(ds, latent_dim=16, iterations=10, seed=0)
    assert np.all(np.isfinite(fit.d_losses)) and np.all(np.isfinite(fit.g_losses))
    z = SplitMix64(1).uniform(50 * 16).reshape(50, 16)
    out, _ = fit.generator.run(z)
    assert out.min() >= 0 and out.max() <= 1


def test_gan_zero_iterations_is_init():
    g = train_gan(synthetic_dataset(4, 16, 0), latent_dim=8, iterations=0, seed=2)
    assert np.array_equal(g.weights, make_generator(8, 16, seed=2, std=0.02).weights)


def test_gan_moments_move_toward_data():
    ds = synthetic_dataset(64, 16, 0)
    z = SplitMix64(99).uniform(256 * 16).reshape(256, 16)
    before = moment_distance(make_generator(16, 16, 0, 0.02).run(z)[0], ds.patches)
    after = moment_distance(train_gan(ds, 16, iterations=25, seed=0).run(z)[0], ds.patches)
    assert after < before


def test_gan_deterministic():
    ds = synthetic_dataset(16, 16, 0)
    a = train_gan(ds, 8, iterations=5, seed=4)
    assert np.array_equal(a.weights, train_gan(ds, 8, iterations=5, seed=4).weights)
