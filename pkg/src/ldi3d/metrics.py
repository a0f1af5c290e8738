"""Reconstruction metrics: PSNR and SSIM on [0, 1] images."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; inf for identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def ssim(a: np.ndarray, b: np.ndarray, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03, peak: float = 1.0) -> float:
    """Structural similarity with the standard 11x11 Gaussian window.

    Multi-channel inputs average the per-channel scores.  Matches the
    common convention: gaussian weights (sigma 1.5, truncated to an 11-tap
    window), population covariance, border crop of the filter radius.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 3:
        return float(np.mean([ssim(a[..., c], b[..., c], sigma, k1, k2, peak)
                              for c in range(a.shape[2])]))

    truncate = 3.5  # 2 * int(3.5 * 1.5 + 0.5) + 1 == 11 taps
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2

    def filt(x):
        return gaussian_filter(x, sigma, truncate=truncate)

    mu_a = filt(a)
    mu_b = filt(b)
    mu_aa = filt(a * a)
    mu_bb = filt(b * b)
    mu_ab = filt(a * b)
    var_a = mu_aa - mu_a * mu_a
    var_b = mu_bb - mu_b * mu_b
    cov = mu_ab - mu_a * mu_b

    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    s = num / den
    r = int(truncate * sigma + 0.5)  # crop the filter support at borders
    if s.shape[0] > 2 * r and s.shape[1] > 2 * r:
        s = s[r:-r, r:-r]
    return float(s.mean())
