"""Two more measurement models: magnitude-only and missing pixels.

Phase retrieval sees |Phi*x| and can only pin x up to sign. Inpainting sees
a random subset of the pixels of each patch.
"""

# %% Setup
from gpp import RecoveryConfig, measure_image, psnr, recover_mask, recover_phase
from gpp.imagecore import psnr_sign_ambiguous
from gpp.verify import planted_generator, planted_image

net = planted_generator()
image, _ = planted_image(net, 2, 2, seed=1001)

# %% Phase retrieval from 128 magnitudes per 256-pixel patch.
bundle = measure_image(image, 16, "phase", rate=0.5, seed=4)
res = recover_phase(bundle, net, RecoveryConfig("phase", lr_schedule="0:1500:2e-2", seed=2))
print(f"phase: PSNR {psnr_sign_ambiguous(res.image, image):.1f} dB (sign ambiguous)")

# %% Inpainting with 30% of pixels kept.
bundle = measure_image(image, 16, "mask", keep_fraction=0.3, seed=4)
res = recover_mask(bundle, net, RecoveryConfig("mask", lr_schedule="0:1500:2e-2"))
print(f"mask 30%: PSNR {psnr(res.image, image):.1f} dB")
