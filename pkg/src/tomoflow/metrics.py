"""Image quality metrics and the metrics CSV report.

PSNR uses a fixed peak (default 1.0, the phantom value range) rather than the
observed maximum, and caps at 99 dB for exact matches.  SSIM is the windowed
mean-local form: 11 x 11 Gaussian window with standard deviation 1.5,
K1 = 0.01, K2 = 0.03, dynamic range equal to the peak, symmetric padding at
the borders.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate

__all__ = ["psnr", "ssim", "gaussian_window", "metrics_rows", "write_metrics_csv"]

PSNR_CAP_DB = 99.0


def _check_pair(x: np.ndarray, ref: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {ref.shape}")
    return x, ref


def psnr(x: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give the 99 dB cap."""
    x, ref = _check_pair(x, ref)
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, float(10.0 * np.log10(peak * peak / mse)))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalized 2D Gaussian window sampled at integer offsets."""
    half = (size - 1) / 2.0
    t = np.arange(size) - half
    w1 = np.exp(-(t * t) / (2.0 * sigma * sigma))
    w = np.outer(w1, w1)
    return w / w.sum()


def ssim(x: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    """Mean local structural similarity.

    ``ssim(ref, ref)`` is exactly 1.0 and the measure is symmetric in its
    arguments to round-off.
    """
    x, ref = _check_pair(x, ref)
    if x is ref or np.array_equal(x, ref):
        return 1.0
    window = gaussian_window()
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    def smooth(a):
        # 'reflect' in scipy.ndimage duplicates the edge sample (symmetric pad)
        return correlate(a, window, mode="reflect")

    mu_x = smooth(x)
    mu_r = smooth(ref)
    xx = smooth(x * x) - mu_x * mu_x
    rr = smooth(ref * ref) - mu_r * mu_r
    xr = smooth(x * ref) - mu_x * mu_r
    num = (2.0 * mu_x * mu_r + c1) * (2.0 * xr + c2)
    den = (mu_x * mu_x + mu_r * mu_r + c1) * (xx + rr + c2)
    return float(np.mean(num / den))


def metrics_rows(method: str, recons, truths, manifest_hash: str, peak: float = 1.0):
    """Per-gate (method, gate, ssim, psnr_db, manifest_hash) rows."""
    if len(recons) != len(truths):
        raise ValueError("need one reconstruction per truth gate")
    rows = []
    for gate, (rec, tru) in enumerate(zip(recons, truths), start=1):
        rows.append(
            {
                "method": method,
                "gate": gate,
                "ssim": ssim(rec, tru, peak=peak),
                "psnr_db": psnr(rec, tru, peak=peak),
                "manifest_hash": manifest_hash,
            }
        )
    return rows


def write_metrics_csv(path: str, rows):
    """Deterministic CSV: fixed column order, repr-exact float formatting."""
    with open(path, "w", newline="") as fh:
        fh.write("method,gate,ssim,psnr_db,manifest_hash\n")
        for r in rows:
            fh.write(
                f"{r['method']},{r['gate']},{r['ssim']:.17g},"
                f"{r['psnr_db']:.17g},{r['manifest_hash']}\n"
            )
