import numpy as np
import pytest

from phqfno import autodiff as ad
from phqfno.fno import (classical_fft, conv_bypass, fourier_layer_classical, spectral_multiply)

from conftest import central_fd, naive_dft


def test_fft_delta_flat():
    d = np.zeros(8)
    d[0] = 1.0
    np.testing.assert_allclose(classical_fft(d), np.full(8, 8 ** -0.5), atol=1e-15)


def test_fft_round_trip(rng):
    z = rng.standard_normal((3, 16, 8)) + 1j * rng.standard_normal((3, 16, 8))
    back = classical_fft(classical_fft(z, (1, 2)), (1, 2), inverse=True)
    np.testing.assert_allclose(back, z, atol=1e-12)


def test_fft_matches_naive(rng):
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    np.testing.assert_allclose(classical_fft(x), naive_dft(x), atol=1e-12)


def test_fft_rejects_non_pow2():
    with pytest.raises(ValueError):
        classical_fft(np.ones(6))


def test_spectral_k0_passthrough(rng):
    s = rng.standard_normal((2, 8, 3))
    sr, si = spectral_multiply(s, -s, np.zeros((0, 3, 3)), np.zeros((0, 3, 3)), 0)
    np.testing.assert_array_equal(sr.data, s)
    np.testing.assert_array_equal(si.data, -s)


def test_spectral_identity_weights(rng):
    sr0, si0 = rng.standard_normal((2, 2, 8, 3))
    w = np.broadcast_to(np.eye(3), (4, 3, 3)).copy()
    sr, si = spectral_multiply(sr0, si0, w, np.zeros_like(w), 4)
    np.testing.assert_allclose(sr.data, sr0, atol=1e-15)
    np.testing.assert_allclose(si.data, si0, atol=1e-15)


def test_spectral_mode0_matmul(rng):
    s = rng.standard_normal((2, 8, 3)) + 1j * rng.standard_normal((2, 8, 3))
    w = rng.standard_normal((1, 3, 3)) + 1j * rng.standard_normal((1, 3, 3))
    sr, si = spectral_multiply(s.real, s.imag, w.real, w.imag, 1)
    got = sr.data + 1j * si.data
    np.testing.assert_allclose(got[:, 0], s[:, 0] @ w[0], atol=1e-12)
    np.testing.assert_array_equal(got[:, 1:], s[:, 1:])


def test_spectral_2d_blocks(rng):
    s = rng.standard_normal((1, 8, 8, 2)) + 1j * rng.standard_normal((1, 8, 8, 2))
    w = rng.standard_normal((2, 3, 2, 2)) + 1j * rng.standard_normal((2, 3, 2, 2))
    sr, si = spectral_multiply(s.real, s.imag, w.real, w.imag, (2, 3))
    got = sr.data + 1j * si.data
    expected = s.copy()
    for i in range(2):
        for j in range(3):
            expected[:, i, j] = s[:, i, j] @ w[i, j]
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_spectral_shape_mismatch():
    with pytest.raises(ad.ShapeError):
        spectral_multiply(np.zeros((1, 8, 3)), np.zeros((1, 8, 3)), np.zeros((2, 2, 2)),
                          np.zeros((2, 2, 2)), 2)


def _params(w, conv, b):
    return {"w_re": ad.Tensor(w.real), "w_im": ad.Tensor(w.imag), "conv": ad.Tensor(conv),
            "conv_b": ad.Tensor(b)}


def test_layer_zero_input_bias_only(rng):
    w = rng.standard_normal((2, 3, 3)) + 0j
    b = rng.standard_normal(3)
    out = fourier_layer_classical(np.zeros((1, 8, 3)),
                                  _params(w, rng.standard_normal((1, 3, 3)), b), 2, "identity")
    np.testing.assert_allclose(out.data, np.broadcast_to(b, (1, 8, 3)), atol=1e-15)


def test_layer_identity_round_trip(rng):
    x = rng.standard_normal((2, 8, 3))
    w = np.broadcast_to(np.eye(3), (3, 3, 3)) + 0j
    out = fourier_layer_classical(x, _params(w, np.zeros((1, 3, 3)), np.zeros(3)), 3, "identity")
    np.testing.assert_allclose(out.data, x, atol=1e-12)


def test_layer_gradient_fd(rng):
    x0 = rng.standard_normal((1, 8, 2))
    vals = {"w_re": rng.standard_normal((2, 2, 2)), "w_im": rng.standard_normal((2, 2, 2)),
            "conv": rng.standard_normal((3, 2, 2)), "conv_b": rng.standard_normal(2)}
    target = rng.standard_normal((1, 8, 2))

    def loss_of(vs, x):
        out = fourier_layer_classical(x, vs, 2, "gelu")
        return ad.sum(ad.square(out - target))

    with ad.Tape() as tape:
        p = {k: ad.Tensor.parameter(v, k) for k, v in vals.items()}
        xp = ad.Tensor.parameter(x0, "x")
        loss = loss_of(p, xp)
    grads = ad.backward(tape, loss, list(p.values()) + [xp])
    for name in list(vals) + ["x"]:
        base = x0 if name == "x" else vals[name]

        def f(v, name=name):
            vs = {k: ad.Tensor(a) for k, a in vals.items()}
            x = x0
            if name == "x":
                x = v
            else:
                vs[name] = ad.Tensor(v)
            return float(loss_of(vs, ad.Tensor(x)).data)

        fd = central_fd(f, base)
        assert np.linalg.norm(grads[name] - fd) / np.linalg.norm(fd) <= 1e-5, name


def test_conv_identity_and_zero(rng):
    x = rng.standard_normal((2, 8, 3))
    k = np.zeros((3, 3, 3))
    np.testing.assert_array_equal(conv_bypass(x, k).data, 0)
    k[1] = np.eye(3)
    np.testing.assert_allclose(conv_bypass(x, k).data, x, atol=1e-15)


def test_conv_1x1_is_matmul(rng):
    x = rng.standard_normal((2, 8, 8, 3))
    k = rng.standard_normal((1, 1, 3, 4))
    np.testing.assert_allclose(conv_bypass(x, k).data, x @ k[0, 0], atol=1e-12)


def test_conv_circular_shift(rng):
    x = rng.standard_normal((1, 8, 1))
    k = np.zeros((3, 1, 1))
    k[2] = 1.0   # picks x[i + 1]
    np.testing.assert_allclose(conv_bypass(x, k).data, np.roll(x, -1, axis=1), atol=1e-15)
