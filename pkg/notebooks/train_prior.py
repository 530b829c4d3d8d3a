"""Regenerate the shipped 16x16 prior (gpp/data/prior16.gppw).

Runs 2000 full-batch epochs on 64 synthetic patches, about 30 s on one core.
With an output path it writes there; otherwise it compares with the shipped file.
"""

import sys
from pathlib import Path

from gpp import bundled_prior_path, save_weights
from gpp.trainer import synthetic_dataset, train_decoder

net = train_decoder(synthetic_dataset(64, 16, seed=0), latent_dim=64, epochs=2000,
                    lr=5e-3, seed=0)
if len(sys.argv) > 1:
    save_weights(sys.argv[1], net)
    print(f"wrote {sys.argv[1]}")
else:
    tmp = Path("prior16.check.gppw")
    save_weights(tmp, net)
    same = tmp.read_bytes() == Path(bundled_prior_path()).read_bytes()
    tmp.unlink()
    print("matches shipped prior" if same else "differs from shipped prior")
