"""FFT-backed 'same' convolution for the band-pass stage.

Kernels are indexed by lag t in [-h, h] with h = (W-1)/2, stored as arrays
ordered from t = -h to t = +h; signals are zero-padded outside their
support.  BandConvPlan caches the input spectrum so the forward convolution
and the backward kernel-gradient correlation share one transform, and the
kernel gradients are reduced over the batch in the frequency domain so the
inverse transform stays kernel-sized.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft


class BandConvPlan:
    """One batch of signals against kernels of a fixed odd width."""

    def __init__(self, x: np.ndarray, kernel_width: int):
        if x.ndim != 2:
            raise ValueError("expected a (B, L) signal batch")
        self.x = x
        self.B, self.L = x.shape
        self.W = kernel_width
        self.half = (kernel_width - 1) // 2
        # covers linear convolution and lag gathering without wraparound
        self.nfft = next_fast_len(self.L + kernel_width)
        self.xf = rfft(x, self.nfft, axis=-1)

    def conv_same(self, kernels: np.ndarray) -> np.ndarray:
        """out[b, n, i] = sum_t x[b, i - t] * kernels[n, t], 'same' padding."""
        kf = rfft(kernels, self.nfft, axis=-1)
        full = irfft(self.xf[:, None, :] * kf[None, :, :], self.nfft, axis=-1)
        return full[..., self.half : self.half + self.L]

    def kernel_grad(self, grad: np.ndarray) -> np.ndarray:
        """d kernels[n, t] = sum_{b,i} grad[b, n, i] * x[b, i - t].

        The batch sum happens on the spectra, so only (N, nfft) comes back
        through the inverse transform.
        """
        gf = rfft(grad, self.nfft, axis=-1)
        prod = np.einsum("bnf,bf->nf", gf, np.conj(self.xf))
        cyclic = irfft(prod, self.nfft, axis=-1)
        neg = cyclic[..., self.nfft - self.half :]
        pos = cyclic[..., : self.half + 1]
        return np.concatenate([neg, pos], axis=-1)


def conv_same(x: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """One-shot 'same' convolution of (B, L) signals with (N, W) kernels."""
    return BandConvPlan(x, kernels.shape[-1]).conv_same(kernels)
