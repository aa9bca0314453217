"""Symbol-synchronous uplink DS-CDMA received-signal synthesis.

A frame at symbol ``i`` is the ``M = N + L - 1`` chip window that starts at
the first chip of symbol ``i``::

    r(i) = sum_k H_k(i) A_k C_k b_k(i) + n(i)

``b_k(i) = [b_k(i+Ls-1), ..., b_k(i), ..., b_k(i-Ls+1)]`` holds the
``2 Ls - 1`` symbols that can reach the window, ``C_k`` stacks shifted copies
of the unit-norm signature and ``H_k(i)`` convolves the chip stream with the
length-``L`` channel, keeping the rows that fall inside the window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .numkernel import MomentSet, crandn

PATH_PROFILE_DB = (0.0, -3.0, -6.0)
CHANNEL_LENGTH = 8


def path_powers(profile_db=PATH_PROFILE_DB) -> np.ndarray:
    """Linear mean path powers, normalized to unit total."""
    pw = 10.0 ** (np.asarray(profile_db, float) / 10.0)
    return pw / pw.sum()


def generate_codes(K: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """``K`` random signatures with i.i.d. equiprobable chips ``+-1/sqrt(N)``."""
    if K < 1 or N < 2:
        raise ValueError(f"need K >= 1 and N >= 2, got K={K}, N={N}")
    return rng.choice([-1.0, 1.0], size=(K, N)) / np.sqrt(N)


def lognormal_powers(K: int, sigma_db: float = 1.5, rng: np.random.Generator | None = None) -> np.ndarray:
    """Amplitudes ``A_k`` whose powers ``A_k^2`` are log-normal with ``sigma_db`` spread."""
    if sigma_db < 0:
        raise ValueError(f"sigma_db must be nonnegative, got {sigma_db}")
    if sigma_db == 0:
        return np.ones(K)
    rng = np.random.default_rng() if rng is None else rng
    return 10.0 ** (rng.normal(0.0, sigma_db, size=K) / 20.0)


@dataclass(frozen=True)
class CdmaScenario:
    """Realized system: user count, spreading, amplitudes, codes and noise level.

    User 1 (index 0) is the desired user; its amplitude fixes the SNR
    ``A_1^2 / sigma^2``.
    """

    K: int
    N: int
    snr_db: float
    amplitudes: np.ndarray
    codes: np.ndarray
    L: int = CHANNEL_LENGTH
    L_s: int = 2
    seed: int | None = None

    def __post_init__(self):
        if self.K < 1 or self.N < 2 or self.L < 1 or self.L_s < 1:
            raise ValueError(f"invalid dimensions K={self.K}, N={self.N}, L={self.L}, L_s={self.L_s}")
        amps = np.asarray(self.amplitudes, float)
        codes = np.asarray(self.codes, float)
        if amps.shape != (self.K,) or np.any(amps <= 0):
            raise ValueError("amplitudes must be K positive reals")
        if codes.shape != (self.K, self.N):
            raise ValueError(f"codes must have shape {(self.K, self.N)}, got {codes.shape}")
        if np.any(np.abs(np.linalg.norm(codes, axis=1) - 1) > 1e-12):
            raise ValueError("codes must have unit norm")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "codes", codes)

    @classmethod
    def draw(cls, K: int = 6, N: int = 16, snr_db: float = 15.0, sigma_db: float = 1.5,
             L: int = CHANNEL_LENGTH, L_s: int = 2, seed: int | None = None,
             rng: np.random.Generator | None = None) -> "CdmaScenario":
        """Random codes and log-normal interferer powers; user 1 at nominal power."""
        rng = np.random.default_rng(seed) if rng is None else rng
        codes = generate_codes(K, N, rng)
        amps = lognormal_powers(K, sigma_db, rng)
        amps[0] = 1.0
        return cls(K=K, N=N, snr_db=snr_db, amplitudes=amps, codes=codes, L=L, L_s=L_s, seed=seed)

    @property
    def M(self) -> int:
        return self.N + self.L - 1

    @property
    def window(self) -> int:
        return 2 * self.L_s - 1

    @property
    def noise_var(self) -> float:
        return float(self.amplitudes[0] ** 2 * 10.0 ** (-self.snr_db / 10.0))


@dataclass(frozen=True)
class ChannelRealization:
    """Per-user channel taps in a length-``L`` container.

    ``taps`` is ``(K, L)`` for a static channel or ``(T, K, L)`` for a
    trajectory indexed by symbol. ``delays`` lists the active tap positions.
    """

    taps: np.ndarray
    delays: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), int))

    @property
    def static(self) -> bool:
        return self.taps.ndim == 2

    def at(self, symbol_index: int) -> np.ndarray:
        return self.taps if self.static else self.taps[symbol_index]


@dataclass(frozen=True)
class SymbolFrame:
    bits: np.ndarray
    noise: np.ndarray
    r: np.ndarray


def build_code_matrix(code, L_s: int) -> np.ndarray:
    """Block-diagonal ``(W N) x W`` matrix of shifted signatures, ``W = 2 L_s - 1``."""
    if L_s < 1:
        raise ValueError(f"L_s must be >= 1, got {L_s}")
    code = np.asarray(code, dtype=np.complex128)
    W = 2 * L_s - 1
    return np.kron(np.eye(W), code[:, None])


def build_convolution_matrix(h, N: int, L_s: int) -> np.ndarray:
    """``M x (W N)`` channel matrix for the stacked chip vector ``C_k b_k``.

    Stacked chip ``q = j N + n`` belongs to symbol ``i + L_s - 1 - j`` and sits
    ``tau = (L_s - 1 - j) N + n`` chips after the window start, so it lands in
    rows ``tau .. tau + L - 1`` (those inside ``0 .. M-1``).
    """
    h = np.asarray(h, dtype=np.complex128)
    L = h.shape[0]
    M = N + L - 1
    W = 2 * L_s - 1
    H = np.zeros((M, W * N), dtype=np.complex128)
    for q in range(W * N):
        j, n = divmod(q, N)
        tau = (L_s - 1 - j) * N + n
        for lag in range(L):
            m = tau + lag
            if 0 <= m < M:
                H[m, q] = h[lag]
    return H


def draw_multipath(rng: np.random.Generator, num_users: int = 1, L: int = CHANNEL_LENGTH,
                   profile_db=PATH_PROFILE_DB) -> ChannelRealization:
    """Static three-path channels with 1-2 chip spacings and Rayleigh gains."""
    P = len(profile_db)
    gaps = rng.integers(1, 3, size=(num_users, P - 1))
    delays = np.concatenate([np.zeros((num_users, 1), int), np.cumsum(gaps, axis=1)], axis=1)
    if delays.max() >= L:
        raise ValueError(f"path delays exceed channel length {L}")
    gains = crandn(rng, num_users, P) * np.sqrt(path_powers(profile_db))
    return ChannelRealization(taps=place_taps(gains, delays, L), delays=delays)


def place_taps(gains: np.ndarray, delays: np.ndarray, L: int) -> np.ndarray:
    """Scatter per-path gains ``(..., K, P)`` into ``(..., K, L)`` tap vectors."""
    out = np.zeros(gains.shape[:-1] + (L,), dtype=np.complex128)
    K = delays.shape[0]
    for k in range(K):
        for p_idx, dl in enumerate(delays[k]):
            out[..., k, dl] += gains[..., k, p_idx]
    return out


def clarke_fading(normalized_doppler: float, num_symbols: int, num_taps: int,
                  rng: np.random.Generator, num_sinusoids: int = 32) -> np.ndarray:
    """Unit-power Rayleigh tap trajectories with Clarke autocorrelation.

    Each tap is a sum of ``num_sinusoids`` unit-amplitude Doppler-shifted
    waves with uniform arrival angles and phases, whose ensemble
    autocorrelation is ``J0(2 pi f_d T k)`` exactly. Returns an array of shape
    ``(num_symbols, num_taps)``.
    """
    if not 0 < normalized_doppler < 0.5:
        raise ValueError(f"normalized Doppler must lie in (0, 0.5), got {normalized_doppler}")
    alpha = rng.uniform(0, 2 * np.pi, size=(num_taps, num_sinusoids))
    phi = rng.uniform(0, 2 * np.pi, size=(num_taps, num_sinusoids))
    t = np.arange(num_symbols)
    omega = 2 * np.pi * normalized_doppler * np.cos(alpha)
    phase = omega[None, :, :] * t[:, None, None] + phi[None, :, :]
    return np.exp(1j * phase).sum(axis=-1) / np.sqrt(num_sinusoids)


def fading_multipath(rng: np.random.Generator, num_users: int, num_symbols: int,
                     normalized_doppler: float, L: int = CHANNEL_LENGTH,
                     profile_db=PATH_PROFILE_DB) -> ChannelRealization:
    """Time-varying three-path channels: random spacings, Clarke-faded gains."""
    static = draw_multipath(rng, num_users, L, profile_db)
    P = len(profile_db)
    fades = clarke_fading(normalized_doppler, num_symbols, num_users * P, rng)
    gains = fades.reshape(num_symbols, num_users, P) * np.sqrt(path_powers(profile_db))
    return ChannelRealization(taps=place_taps(gains, static.delays, L), delays=static.delays)


def signature_responses(scenario: CdmaScenario, taps: np.ndarray) -> np.ndarray:
    """Effective ``(K, M, W)`` matrices ``A_k H_k C_k`` for one symbol's taps."""
    out = np.empty((scenario.K, scenario.M, scenario.window), dtype=np.complex128)
    for k in range(scenario.K):
        H = build_convolution_matrix(taps[k], scenario.N, scenario.L_s)
        C = build_code_matrix(scenario.codes[k], scenario.L_s)
        out[k] = scenario.amplitudes[k] * (H @ C)
    return out


def synthesize_received(scenario: CdmaScenario, channels: ChannelRealization, bits,
                        noise=None, symbol_index: int = 0) -> SymbolFrame:
    """Received vector for one symbol.

    Parameters
    ----------
    bits : array_like, shape (K, 2 L_s - 1)
        Per-user symbol windows ordered newest first.
    noise : array_like, shape (M,), optional
        Noise sample; zero if omitted.
    symbol_index : int
        Selects the taps of a time-varying channel.
    """
    bits = np.asarray(bits, float)
    if bits.shape != (scenario.K, scenario.window):
        raise ValueError(f"bits must have shape {(scenario.K, scenario.window)}, got {bits.shape}")
    taps = channels.at(symbol_index)
    if taps.shape != (scenario.K, scenario.L):
        raise ValueError(f"channel taps have shape {taps.shape}, expected {(scenario.K, scenario.L)}")
    noise = np.zeros(scenario.M, complex) if noise is None else np.asarray(noise, complex)
    if noise.shape != (scenario.M,):
        raise ValueError(f"noise must have length {scenario.M}")
    G = signature_responses(scenario, taps)
    r = np.einsum("kmw,kw->m", G, bits) + noise
    return SymbolFrame(bits=bits, noise=noise, r=r)


def frame_bits(bit_stream: np.ndarray, i: int, L_s: int) -> np.ndarray:
    """Window ``b_k(i)`` from a ``(K, T + 2 L_s - 2)`` stream offset by ``L_s - 1``."""
    c = i + L_s - 1
    return bit_stream[:, c - L_s + 1:c + L_s][:, ::-1]


@dataclass(frozen=True)
class Stream:
    """A block of consecutive frames for one Monte Carlo run."""

    r: np.ndarray       # (T, M)
    bits: np.ndarray    # (K, T + 2 L_s - 2), symbol j stored at column j + L_s - 1
    noise: np.ndarray   # (T, M)
    channels: ChannelRealization

    @property
    def desired(self) -> np.ndarray:
        L_s = (self.bits.shape[1] - self.r.shape[0]) // 2 + 1
        return self.bits[0, L_s - 1:L_s - 1 + self.r.shape[0]].astype(np.complex128)


def generate_stream(scenario: CdmaScenario, channels: ChannelRealization, num_symbols: int,
                    rng: np.random.Generator) -> Stream:
    """Vectorized synthesis of ``num_symbols`` consecutive frames.

    Draw order is fixed (bits, then noise) so a seed determines the stream.
    """
    K, N, L, L_s, M = scenario.K, scenario.N, scenario.L, scenario.L_s, scenario.M
    T = num_symbols
    bits = rng.choice([-1.0, 1.0], size=(K, T + 2 * L_s - 2))
    noise = np.sqrt(scenario.noise_var) * crandn(rng, T, M)
    if L > 1 and (L_s < 2 or L - 1 > (L_s - 1) * N):
        # window misses ISI chips the segment path would include
        r = np.array([synthesize_received(scenario, channels, frame_bits(bits, i, L_s),
                                          noise[i], i).r for i in range(T)])
        return Stream(r=r, bits=bits, noise=noise, channels=channels)
    chips = (bits[:, :, None] * scenario.codes[:, None, :]).reshape(K, -1)
    chips = chips * scenario.amplitudes[:, None]
    start = (L_s - 1) * N - (L - 1)
    span = M + L - 1
    seg = sliding_window_view(chips[:, start:], span, axis=-1)[:, ::N][:, :T]
    X = sliding_window_view(seg, L, axis=-1)            # (K, T, M, L)
    taps = channels.taps
    if channels.static:
        h_rev = np.broadcast_to(taps[:, None, ::-1], (K, T, L))
    else:
        h_rev = np.transpose(taps[:T, :, ::-1], (1, 0, 2))
    r = np.einsum("ktmu,ktu->tm", X, h_rev) + noise
    return Stream(r=r, bits=bits, noise=noise, channels=channels)


def scenario_moments(scenario: CdmaScenario, taps: np.ndarray) -> MomentSet:
    """Exact moments of ``(r, b_1)`` for given taps with i.i.d. BPSK symbols."""
    G = signature_responses(scenario, taps)
    R = np.einsum("kmw,knw->mn", G, G.conj()) + scenario.noise_var * np.eye(scenario.M)
    R = 0.5 * (R + R.conj().T)
    p = G[0, :, scenario.L_s - 1].copy()
    return MomentSet(R=R, p=p, sigma_d_sq=1.0)


def tap_responses(scenario: CdmaScenario) -> np.ndarray:
    """Per-tap basis ``B[k, l] = A_k H(e_l) C_k`` of shape ``(K, L, M, W)``.

    ``A_k H_k C_k`` is linear in the taps, so for taps ``h`` it equals
    ``sum_l h[k, l] B[k, l]``.
    """
    K, L = scenario.K, scenario.L
    eye = np.eye(L)
    out = np.empty((K, L, scenario.M, scenario.window), dtype=np.complex128)
    for k in range(K):
        C = build_code_matrix(scenario.codes[k], scenario.L_s)
        for lag in range(L):
            out[k, lag] = scenario.amplitudes[k] * (build_convolution_matrix(eye[lag], scenario.N, scenario.L_s) @ C)
    return out


def batched_moments(scenario: CdmaScenario, taps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``R`` and ``p`` for a stack of tap sets ``(T, K, L)``."""
    G = np.einsum("tkl,klmw->tkmw", taps, tap_responses(scenario))
    R = np.einsum("tkmw,tknw->tmn", G, G.conj()) + scenario.noise_var * np.eye(scenario.M)
    return R, G[:, 0, :, scenario.L_s - 1].copy()
