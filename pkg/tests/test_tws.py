import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twsforecast import tws
from twsforecast.spectral import covariance, eigh
from twsforecast.tws import TwsWhitener, captured_variance_ratio, select_k, whiten_window


def correlated_series(rng, n=5, length=400):
    mix = rng.normal(size=(n, n)) * np.linspace(2.0, 0.1, n)
    return mix @ rng.normal(size=(n, length)) + rng.normal(size=(n, 1)) * 3


def loop_projection(w, window):
    n, length = window.shape
    out = np.empty_like(window)
    for t in range(length):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                pij = sum(w.basis[i, c] * w.basis[j, c] for c in range(w.k))
                acc += pij * (window[j, t] - w.mean[j])
            out[i, t] = w.mean[i] + acc
    return out


def spectrum_whitener(lam, threshold=0.90):
    lam = np.asarray(lam, dtype=float)
    k = select_k(lam, threshold)
    return TwsWhitener(np.zeros(lam.size), lam, np.eye(lam.size)[:, :k], k, threshold)


def test_k_selection_from_spectrum():
    w = spectrum_whitener([5, 3, 1, 1])
    assert w.k == 3
    assert captured_variance_ratio(w) == 0.9


def test_threshold_one_keeps_everything():
    rng = np.random.default_rng(0)
    w = tws.fit(correlated_series(rng), threshold=1.0)
    assert w.k == 5
    assert captured_variance_ratio(w) == pytest.approx(1.0, abs=1e-12)


def test_rank_two_data_gives_k2():
    rng = np.random.default_rng(1)
    f1 = rng.normal(size=4000)
    # var(f1) + var(2 f1) = 5, so var(f3) = 5 * 0.3 / 0.7 gives ratios ~ [0.7, 0.3, 0]
    f3 = rng.normal(size=4000) * np.sqrt(5 * 0.3 / 0.7)
    x = np.vstack([f1, 2 * f1, f3])
    w = tws.fit(x, 0.90)
    lam = np.linalg.eigvalsh(np.cov(x))[::-1]  # independent spectral oracle
    assert np.allclose(lam / lam.sum(), [0.7, 0.3, 0.0], atol=0.03)
    assert np.allclose(w.eigenvalues, lam, atol=1e-9)
    assert w.k == 2


def test_fit_invariants():
    rng = np.random.default_rng(2)
    w = tws.fit(correlated_series(rng, 6, 800))
    assert 1 <= w.k <= 6
    assert np.abs(w.basis.T @ w.basis - np.eye(w.k)).max() < 1e-8
    assert 0.90 <= captured_variance_ratio(w) <= 1.0
    lam = w.eigenvalues
    if w.k > 1:
        assert lam[: w.k - 1].sum() / lam.sum() < 0.90


def test_captured_ratio_matches_recomputation():
    rng = np.random.default_rng(3)
    x = correlated_series(rng, 7, 500)
    w = tws.fit(x)
    lam = eigh(covariance(x - x.mean(axis=1, keepdims=True))).eigenvalues
    assert abs(captured_variance_ratio(w) - lam[: w.k].sum() / lam.sum()) < 1e-12


def test_zero_variance_is_degenerate():
    w = tws.fit(np.full((3, 50), 4.0))
    assert w.degenerate and w.k == 1
    assert np.array_equal(w.basis[:, 0], [1.0, 0.0, 0.0])
    assert captured_variance_ratio(w) == 1.0


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        tws.fit(np.zeros((3, 1)))
    with pytest.raises(ValueError):
        tws.fit(np.zeros((3, 10)), threshold=0.0)


def test_full_basis_is_identity():
    rng = np.random.default_rng(4)
    w = tws.fit(correlated_series(rng), threshold=1.0)
    window = rng.normal(size=(5, 96))
    assert np.abs(whiten_window(w, window) - window).max() < 1e-8


def test_mean_window_is_fixed_point():
    rng = np.random.default_rng(5)
    w = tws.fit(correlated_series(rng), threshold=0.5)
    window = np.repeat(w.mean[:, None], 96, axis=1)
    assert np.abs(whiten_window(w, window) - window).max() < 1e-12


def test_projection_matches_loop_oracle():
    rng = np.random.default_rng(6)
    x = correlated_series(rng, 5, 600)
    w = tws.fit(x, threshold=0.9)
    lam = w.eigenvalues
    k3 = TwsWhitener(w.mean, lam, eigh(covariance(x - w.mean[:, None])).eigenvectors[:, :3], 3)
    window = rng.normal(size=(5, 96))
    assert np.abs(whiten_window(k3, window) - loop_projection(k3, window)).max() < 1e-9


def test_literal_mode_formula():
    rng = np.random.default_rng(7)
    w = tws.fit(correlated_series(rng), threshold=0.8, centered_projection=False)
    e = rng.normal(size=(5, 20))
    expected = w.basis @ (w.basis.T @ e) + w.mean[:, None]
    assert np.allclose(whiten_window(w, e), expected, atol=1e-12)


def test_shape_mismatch():
    rng = np.random.default_rng(8)
    w = tws.fit(correlated_series(rng))
    with pytest.raises(ValueError):
        whiten_window(w, np.zeros((4, 96)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.3, 1.0))
def test_projection_properties(seed, threshold):
    rng = np.random.default_rng(seed)
    w = tws.fit(correlated_series(rng, 5, 300), threshold)
    window = rng.normal(size=(5, 32)) * 4
    out = whiten_window(w, window)
    mu = w.mean[:, None]
    assert np.abs(whiten_window(w, out) - out).max() < 1e-8
    assert np.linalg.norm(out - mu) <= np.linalg.norm(window - mu) + 1e-9
    assert np.abs(w.basis.T @ (window - out)).max() < 1e-8


def test_order_invariance():
    rng = np.random.default_rng(9)
    w = tws.fit(correlated_series(rng))
    a, b = rng.normal(size=(5, 30)), rng.normal(size=(5, 50))
    joint = whiten_window(w, np.hstack([a, b]))
    assert np.allclose(joint[:, :30], whiten_window(w, a), atol=1e-12)
    assert np.allclose(joint[:, 30:], whiten_window(w, b), atol=1e-12)


def test_batched_windows_match_single():
    rng = np.random.default_rng(10)
    w = tws.fit(correlated_series(rng))
    batch = rng.normal(size=(4, 5, 16))
    out = whiten_window(w, batch)
    for i in range(4):
        assert np.allclose(out[i], whiten_window(w, batch[i]), atol=1e-12)


def test_persistence_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    w = tws.fit(correlated_series(rng), threshold=0.85)
    path = tmp_path / "whitener.json"
    tws.save(w, path)
    assert tws.load(path) == w


def test_persistence_rejects_other_versions(tmp_path):
    rng = np.random.default_rng(12)
    payload = tws.to_dict(tws.fit(correlated_series(rng)))
    payload["format_version"] = 99
    with pytest.raises(ValueError):
        tws.from_dict(payload)
