import numpy as np
import pytest

from tomoflow.metrics import gaussian_window, metrics_rows, psnr, ssim, write_metrics_csv


def reference_ssim(x, ref, peak=1.0):
    """Independently coded windowed SSIM: explicit per-pixel loops over a
    symmetric-padded image, no shared helpers with the implementation."""
    size, sigma = 11, 1.5
    half = size // 2
    t = np.arange(size) - half
    w1 = np.exp(-(t * t) / (2 * sigma * sigma))
    w = np.outer(w1, w1)
    w /= w.sum()
    xp = np.pad(x, half, mode="symmetric")
    rp = np.pad(ref, half, mode="symmetric")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    vals = []
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            a = xp[i : i + size, j : j + size]
            b = rp[i : i + size, j : j + size]
            ma = np.sum(w * a)
            mb = np.sum(w * b)
            va = np.sum(w * a * a) - ma * ma
            vb = np.sum(w * b * b) - mb * mb
            cab = np.sum(w * a * b) - ma * mb
            vals.append(
                ((2 * ma * mb + c1) * (2 * cab + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2))
            )
    return float(np.mean(vals))


def test_psnr_identical_hits_cap():
    x = np.random.default_rng(0).random((8, 8))
    assert psnr(x, x) == 99.0


def test_psnr_closed_form():
    ref = np.zeros((16, 16))
    x = np.full((16, 16), 0.1)
    # MSE = 0.01, peak = 1 -> 10*log10(100) = 20 dB
    assert psnr(x, ref, peak=1.0) == pytest.approx(20.0, abs=1e-12)


def test_psnr_matches_direct_formula():
    rng = np.random.default_rng(3)
    x = rng.random((12, 9))
    ref = rng.random((12, 9))
    mse = np.mean((x - ref) ** 2)
    assert psnr(x, ref, peak=2.0) == pytest.approx(10 * np.log10(4.0 / mse), rel=1e-14)


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_psnr_monotone_in_error_size():
    rng = np.random.default_rng(4)
    ref = rng.random((16, 16))
    noise = rng.standard_normal((16, 16))
    values = [psnr(ref + a * noise, ref) for a in (0.2, 0.1, 0.05, 0.01)]
    assert values == sorted(values)


def test_gaussian_window_normalized_symmetric():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    np.testing.assert_allclose(w, w.T)
    np.testing.assert_allclose(w, w[::-1, :])
    assert w[5, 5] == w.max()


def test_ssim_identity_exact():
    x = np.random.default_rng(5).random((20, 20))
    assert ssim(x, x) == 1.0


def test_ssim_symmetry():
    rng = np.random.default_rng(6)
    a = rng.random((16, 16))
    b = rng.random((16, 16))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_decreases_with_noise():
    rng = np.random.default_rng(7)
    ref = rng.random((32, 32))
    noise = rng.standard_normal((32, 32))
    s = [ssim(ref + a * noise, ref) for a in (0.05, 0.15, 0.45)]
    assert s[0] > s[1] > s[2]
    assert all(v <= 1.0 for v in s)


def test_ssim_matches_reference_implementation():
    rng = np.random.default_rng(8)
    x = rng.random((8, 8))
    ref = rng.random((8, 8))
    assert ssim(x, ref) == pytest.approx(reference_ssim(x, ref), abs=1e-10)


def test_ssim_matches_reference_larger_peak():
    rng = np.random.default_rng(9)
    x = 3.0 * rng.random((8, 8))
    ref = 3.0 * rng.random((8, 8))
    assert ssim(x, ref, peak=3.0) == pytest.approx(reference_ssim(x, ref, peak=3.0), abs=1e-10)


def test_metrics_deterministic():
    rng = np.random.default_rng(10)
    x = rng.random((16, 16))
    ref = rng.random((16, 16))
    assert ssim(x, ref) == ssim(x.copy(), ref.copy())
    assert psnr(x, ref) == psnr(x.copy(), ref.copy())


def test_metrics_rows_and_csv(tmp_path):
    rng = np.random.default_rng(11)
    truths = [rng.random((8, 8)) for _ in range(3)]
    recons = [t + 0.05 * rng.standard_normal((8, 8)) for t in truths]
    rows = metrics_rows("joint", recons, truths, "cafe" * 16)
    assert [r["gate"] for r in rows] == [1, 2, 3]
    assert all(r["method"] == "joint" for r in rows)
    assert all(-1.0 <= r["ssim"] <= 1.0 for r in rows)

    path = tmp_path / "metrics.csv"
    write_metrics_csv(str(path), rows)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "method,gate,ssim,psnr_db,manifest_hash"
    assert len(lines) == 4
    for line, row in zip(lines[1:], rows):
        method, gate, s, p, digest = line.split(",")
        assert method == "joint"
        assert int(gate) == row["gate"]
        assert float(s) == row["ssim"]  # 17 significant digits round-trips
        assert float(p) == row["psnr_db"]
        assert digest == "cafe" * 16

    # byte-identical on rewrite
    path2 = tmp_path / "metrics2.csv"
    write_metrics_csv(str(path2), rows)
    assert path.read_bytes() == path2.read_bytes()


def test_metrics_rows_length_mismatch():
    with pytest.raises(ValueError):
        metrics_rows("joint", [np.zeros((4, 4))], [], "00")
