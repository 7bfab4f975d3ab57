"""Noise2Recon desk-scale MRI reconstruction lab (C++ core)."""

from ._core import (
    ConfigError,
    DimensionError,
    NumericalError,
    ParseError,
    SamplingMask,
    UsageError,
    add_masked_noise,
    adjoint_sense,
    coil_sensitivities,
    cs_lambda_schedule,
    cs_solve,
    dwt2,
    evaluate,
    fft2c,
    forward_model,
    gradcheck,
    idwt2,
    ifft2c,
    nrmse,
    phantom,
    poisson_disc_mask,
    psnr,
    report,
    simulate,
    ssim,
    train,
)

__version__ = "0.1.0"
