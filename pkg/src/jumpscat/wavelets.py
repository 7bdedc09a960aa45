"""Complex spline wavelet filter bank, handcrafted filters, and the scattering embedding.

The bank holds J dyadic dilations of a complex spline (Battle-Lemarie) wavelet,
discretized on the symmetric window grid t = -n..n (T = 2n+1 points).  Filters
are defined directly by their DFT: the real, nonnegative spline spectrum is
sampled at the grid frequencies and kept on positive frequencies only (the
analytic pairing).  This makes the three structural invariants hold to machine
precision by construction:

* zero mean                (DC bin is zero),
* real discrete spectrum   (definition),
* even real / odd imaginary time samples (inverse DFT of a real spectrum).

All objects here are immutable after construction; `embed` is a pure function
and can run concurrently across events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateWindowError, ScaleOverflowError

WINDOW_LEN = 119  # 59 + 1 + 59 minutes around the jump
WINDOW_RADIUS = WINDOW_LEN // 2


def _inv_power_sum(omega, n, k_max=500):
    """sum_k (omega + 2 pi k)^(-n) over k = -k_max..k_max.

    Terms decay like k^(-n); for n >= 4 the truncation error at k_max=500 is
    far below double precision.  Callers must keep omega away from multiples
    of 2*pi (poles).
    """
    omega = np.asarray(omega, dtype=float)
    ks = 2.0 * np.pi * np.arange(-k_max, k_max + 1)
    return np.sum((omega[..., None] + ks) ** (-float(n)), axis=-1)


def spline_wavelet_spectrum(omega, order=3):
    """Real, even, nonnegative spectrum of the spline wavelet of given order.

    Vanishes at omega = 0 with order+1 vanishing moments; peaks between pi
    and 2*pi.  Evaluated from the closed form built on the lattice sums
    S_n(w) = sum_k (w + 2 pi k)^(-n) with n = 2*order + 2.
    """
    omega = np.asarray(omega, dtype=float)
    out = np.zeros_like(omega)
    nz = omega != 0.0
    w = omega[nz]
    n = 2 * order + 2
    num = _inv_power_sum(w / 2.0 + np.pi, n)
    den = _inv_power_sum(w, n) * _inv_power_sum(w / 2.0, n)
    out[nz] = np.sqrt(num / den) / np.abs(w) ** (order + 1)
    return out


def _bump(dist, peak, width):
    return np.exp(-0.5 * ((dist - peak) / width) ** 2)


def _handcrafted_filters(T, support=8, peak=1.0, width=2.5):
    """Build (psi_MR, psi_TR) on the symmetric grid.

    psi_MR is odd (positive before the jump, negative after), psi_TR is even
    with zero average; both are zero at t = 0, unit l2 norm, and mutually
    orthogonal by parity.  Shapes come from a Gaussian bump over distances
    1..support peaking at `peak`.
    """
    n = T // 2
    if support > n:
        raise DataError(f"filter support {support} exceeds window radius {n}")
    dist = np.arange(1, support + 1, dtype=float)
    h = _bump(dist, peak, width)

    mr = np.zeros(T)
    mr[n - support:n] = h[::-1]          # t in [-support, -1]
    mr[n + 1:n + support + 1] = -h       # t in [1, support], mirrored bitwise
    mr /= np.linalg.norm(mr)

    g = h - h.mean()                     # zero average over the support
    tr = np.zeros(T)
    tr[n - support:n] = g[::-1]
    tr[n + 1:n + support + 1] = g
    tr /= np.linalg.norm(tr)
    return mr, tr


@dataclass(frozen=True)
class FilterBank:
    """J complex wavelets plus the handcrafted mean-reversion/trend filters."""

    J: int
    T: int
    order: int
    boundary: str                # "zero" | "circular"
    filters: np.ndarray          # (J, T) complex time samples, row j-1 = scale 2^j
    spectra: np.ndarray          # (J, T) real DFT (numpy frequency order)
    mr_filter: np.ndarray        # (T,) real
    tr_filter: np.ndarray        # (T,) real
    _padded_fft: np.ndarray      # (J, L) FFT of time-reversed filters, zero-pad path
    _pad_len: int

    @property
    def radius(self):
        return self.T // 2

    @property
    def pair_list(self):
        """Second-order (j1, j2) pairs, j1 < j2, lexicographic."""
        return [(j1, j2) for j1 in range(1, self.J + 1) for j2 in range(j1 + 1, self.J + 1)]

    def metadata(self):
        return {"family": "battle_lemarie", "order": self.order, "J": self.J,
                "T": self.T, "boundary": self.boundary}


def build_filter_bank(J=6, T=WINDOW_LEN, order=3, boundary="zero",
                      mr_support=8, mr_peak=1.0, mr_width=2.5):
    """Construct the bank for window length T (odd) and scales j = 1..J."""
    if T % 2 == 0:
        raise DataError(f"window length must be odd, got {T}")
    if 2 ** J > T:
        raise ScaleOverflowError(f"2^J = {2 ** J} exceeds window length {T}")
    if boundary not in ("zero", "circular"):
        raise DataError(f"unknown boundary mode {boundary!r}")

    n = T // 2
    pos_freqs = 2.0 * np.pi * np.arange(1, n + 1) / T
    filters = np.empty((J, T), dtype=complex)
    spectra = np.zeros((J, T))
    for j in range(1, J + 1):
        spec = np.zeros(T)
        spec[1:n + 1] = 2.0 * spline_wavelet_spectrum(2.0 ** j * pos_freqs, order)
        g = np.fft.ifft(spec)            # index m <-> time m mod T
        filters[j - 1] = np.roll(g, n)   # index i <-> time i - n
        spectra[j - 1] = spec
        if not np.any(spec):
            raise ScaleOverflowError(f"scale j={j} has empty spectrum on this grid")

    mr, tr = _handcrafted_filters(T, support=mr_support, peak=mr_peak, width=mr_width)

    pad_len = 1 << int(np.ceil(np.log2(2 * T - 1)))
    padded = np.fft.fft(filters[:, ::-1], n=pad_len, axis=1)

    return FilterBank(J=J, T=T, order=order, boundary=boundary,
                      filters=filters, spectra=spectra,
                      mr_filter=mr, tr_filter=tr,
                      _padded_fft=padded, _pad_len=pad_len)


# ---------------------------------------------------------------------------
# Convolution.  Convention: (x * psi)(t) = sum_u x(t - u) psi(-u)
#                                        = sum_v x(t + v) psi(v),
# so the value at t = 0 is the plain inner product sum_v x(v) psi(v).
# ---------------------------------------------------------------------------

def convolve(x, psi, boundary="zero"):
    """Full transform: array of (x * psi)(t) for every t on the grid.

    "zero" treats x as zero outside the window; "circular" wraps it.
    """
    x = np.asarray(x)
    psi = np.asarray(psi)
    T = x.shape[-1]
    if psi.shape[-1] != T:
        raise DataError("signal and filter must share the grid")
    n = T // 2
    rev = psi[::-1]                      # rev[i] = psi(-(i - n))
    if boundary == "zero":
        L = 1 << int(np.ceil(np.log2(2 * T - 1)))
        c = np.fft.ifft(np.fft.fft(x, n=L) * np.fft.fft(rev, n=L))
        out = c[n:n + T]
    elif boundary == "circular":
        c = np.fft.ifft(np.fft.fft(x) * np.fft.fft(rev))
        out = np.roll(c, -n)
    else:
        raise DataError(f"unknown boundary mode {boundary!r}")
    if np.isrealobj(x) and np.isrealobj(psi):
        return out.real
    return out


def convolve_at(x, psi, t, boundary="zero"):
    """(x * psi)(t) at a single integer offset t in [-n, n]."""
    x = np.asarray(x)
    n = x.shape[-1] // 2
    if not -n <= t <= n:
        raise DataError(f"t={t} outside the grid [-{n}, {n}]")
    return convolve(x, psi, boundary=boundary)[t + n]


def _bank_transform(bank, x):
    """All J wavelet transforms of x at once; returns (J, T) complex."""
    if bank.boundary == "zero":
        X = np.fft.fft(x, n=bank._pad_len)
        c = np.fft.ifft(X[None, :] * bank._padded_fft, axis=1)
        n = bank.radius
        return c[:, n:n + bank.T]
    X = np.fft.fft(x)
    rev_fft = np.fft.fft(bank.filters[:, ::-1], axis=1)
    return np.roll(np.fft.ifft(X[None, :] * rev_fft, axis=1), -bank.radius, axis=1)


# ---------------------------------------------------------------------------
# Scattering embedding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScatterEmbedding:
    """Normalized first/second-order scattering coefficients of one window.

    first_order[j-1]   = (x_aligned * psi_j)(0) / sigma_j
    second_order[k]    = (|x * psi_j1| * psi_j2)(0) / sigma_(j1,j2),  j1 < j2
    with each sigma the root-mean-square over t of the coefficient's own
    defining time-series.  `flat` lays out all real parts (first order by j,
    then pairs lexicographic) followed by all imaginary parts in the same
    order: 2*(J + J*(J-1)/2) numbers, i.e. 42 for J = 6.
    """

    J: int
    first_order: np.ndarray    # (J,) complex
    second_order: np.ndarray   # (J*(J-1)/2,) complex
    sigma1: np.ndarray         # (J,)
    sigma2: np.ndarray         # (J*(J-1)/2,)

    @property
    def flat(self):
        full = np.concatenate([self.first_order, self.second_order])
        return np.concatenate([full.real, full.imag])

    @property
    def imag_second(self):
        """The imaginary second-order block (the reflexivity features)."""
        return self.second_order.imag.copy()

    def __len__(self):
        return 2 * (self.J + self.J * (self.J - 1) // 2)


def embed_window(window, sign, bank):
    """Scattering embedding of one raw window with the given jump sign."""
    x = np.asarray(window, dtype=float)
    if x.shape != (bank.T,):
        raise DataError(f"window length {x.shape} does not match bank T={bank.T}")
    if not np.all(np.isfinite(x)):
        raise DataError("window contains non-finite values")

    n = bank.radius
    aligned = sign * x
    W = _bank_transform(bank, aligned)           # (J, T); |W(aligned)| == |W(x)|
    U = np.abs(W)

    sigma1 = np.sqrt(np.mean(U ** 2, axis=1))
    if np.any(sigma1 == 0.0):
        raise DegenerateWindowError("window has zero energy at some scale")
    first = W[:, n] / sigma1

    pairs = bank.pair_list
    second = np.empty(len(pairs), dtype=complex)
    sigma2 = np.empty(len(pairs))
    k = 0
    for j1 in range(1, bank.J + 1):
        V = _bank_transform(bank, U[j1 - 1])
        for j2 in range(j1 + 1, bank.J + 1):
            series = V[j2 - 1]
            s = np.sqrt(np.mean(np.abs(series) ** 2))
            if s == 0.0:
                raise DegenerateWindowError(
                    f"second-order series (j1={j1}, j2={j2}) has zero energy")
            second[k] = series[n] / s
            sigma2[k] = s
            k += 1
    return ScatterEmbedding(J=bank.J, first_order=first, second_order=second,
                            sigma1=sigma1, sigma2=sigma2)


def embed(event, bank):
    """Embedding of a JumpEvent (uses its stored window and sign)."""
    return embed_window(event.window, event.sign, bank)
