"""Spectral-residual saliency for texture-based candidate masking.

Saliency is computed at a fixed working width on the log-amplitude
spectrum: the residual of the log amplitude against its local mean marks
"unexpected" frequency content, whose reconstruction concentrates on
visually informative regions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter, uniform_filter

WORKING_WIDTH = 64
_LOG_EPS = 1e-12
_SMOOTH_SIGMA = 3.0
_MASK_FACTOR = 3.0
_FLAT_GUARD = 1e-8


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray   # (H, W) floats in [0, 1]
    mask: np.ndarray     # (H, W) bool, True where value > 3 * mean

    def __post_init__(self):
        self.values.setflags(write=False)
        self.mask.setflags(write=False)


def _to_gray(frame: np.ndarray) -> np.ndarray:
    f = frame.astype(np.float64)
    if f.ndim == 2:
        return f
    return f[..., 0] * 0.299 + f[..., 1] * 0.587 + f[..., 2] * 0.114


def _resize_float(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    if arr.shape == (height, width):
        return arr
    im = Image.fromarray(arr.astype(np.float32), mode="F")
    return np.asarray(im.resize((width, height), Image.BILINEAR),
                      dtype=np.float64)


def spectral_residual_saliency(frame: np.ndarray) -> SaliencyMap:
    """Spectral-residual saliency map plus its thresholded binary mask.

    Steps: grayscale, downscale to the working width, 2-D FFT,
    log-amplitude minus its 3x3 local mean, reconstruct with the original
    phase, square, Gaussian-smooth, upsample, normalize to [0, 1]. The mask
    keeps values above 3x the mean. A (near-)flat saliency field normalizes
    to all zeros rather than amplifying numerical ripple.
    """
    gray = _to_gray(frame)
    h, w = gray.shape
    sw = WORKING_WIDTH
    sh = max(1, int(round(h * sw / w)))
    small = _resize_float(gray, sw, sh)
    if float(np.ptp(small)) < 1e-9:
        zeros = np.zeros((h, w))
        return SaliencyMap(values=zeros, mask=zeros > 0)
    # Removing the mean pins the DC bin at zero, which makes the map (and
    # its thresholded mask) invariant to uniform brightness shifts.
    small = small - small.mean()

    spectrum = np.fft.fft2(small)
    log_amp = np.log(np.abs(spectrum) + _LOG_EPS)
    residual = log_amp - uniform_filter(log_amp, size=3, mode="wrap")
    recon = np.fft.ifft2(np.exp(residual + 1j * np.angle(spectrum)))
    sal = gaussian_filter(np.abs(recon) ** 2, _SMOOTH_SIGMA, mode="wrap")

    sal = _resize_float(sal, w, h)
    sal = np.maximum(sal, 0.0)
    lo = float(sal.min())
    hi = float(sal.max())
    if hi <= 0.0 or (hi - lo) <= _FLAT_GUARD * max(hi, 1.0):
        values = np.zeros_like(sal)
    else:
        values = (sal - lo) / (hi - lo)
    mask = values > _MASK_FACTOR * float(values.mean())
    return SaliencyMap(values=values, mask=mask)
