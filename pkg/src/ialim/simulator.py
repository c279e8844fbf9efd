"""Monte Carlo ground truth: channel sampling, CSI quantization, iterative
interference alignment and empirical outage / rate / SER estimation.

Randomness is counter-based: trials are processed in fixed-size blocks and
block b of a run with seed s uses an independent Philox stream keyed by
(s, b). Estimates are therefore bit-identical for a given seed regardless
of how blocks are scheduled across threads.

Quantization modes:

* ``error-model`` (default): channels and quantized directions are drawn
  jointly so that the residual interference of each link follows the
  gamma law the closed forms assume. This is the mode acceptance testing
  gates on.
* ``rvq``: explicit random codebooks; agreement with the closed forms is
  only as good as the quantization-cell approximation and is reported,
  not gated.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import (
    FeedbackConfig,
    InfeasibleConfigError,
    Modulation,
    SystemConfig,
    feasibility_check,
    feasibility_diagnostic,
)

__all__ = [
    "ChannelRealization",
    "QuantizedCSI",
    "IASolution",
    "MetricEstimate",
    "sample_channels",
    "rvq_quantize",
    "error_model_quantize",
    "ia_solve",
    "sinr",
    "simulate_sinr_samples",
    "simulate_interference_samples",
    "estimate_outage",
    "estimate_rate",
    "estimate_ser",
    "conditional_ser",
    "feasibility_check",
    "feasibility_diagnostic",
]

ERROR_MODEL = "error-model"
RVQ = "rvq"

RVQ_MAX_BITS = 24
BLOCK_SIZE = 8192


class RvqBudgetError(ValueError):
    """Codebook budget beyond the enumeration cap."""


@dataclass(frozen=True)
class ChannelRealization:
    """Small-scale fading matrices H[k][i] (Nr x Nt, unit-variance complex
    Gaussian entries); path loss is applied separately through kappa."""

    H: np.ndarray  # (K, K, Nr, Nt) complex


@dataclass(frozen=True)
class QuantizedCSI:
    hhat: np.ndarray  # unit-norm direction vector, length Nt*Nr
    rho_actual: float  # realized squared sine of the quantization angle
    mode: str


@dataclass(frozen=True)
class IASolution:
    w: tuple[np.ndarray, ...]  # per pair (d_i, Nt), orthonormal rows
    v: tuple[np.ndarray, ...]  # per pair (d_k, Nr), unit rows
    leakage: float  # relative residual alignment error
    iterations: int
    converged: bool


@dataclass(frozen=True)
class MetricEstimate:
    mean: float
    stderr: float
    trials: int
    nonconverged: int = 0


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Philox stream for one trial block; independent of scheduling."""
    key = ((int(seed) & 0xFFFFFFFFFFFFFFFF) << 64) | (block & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. circular complex Gaussian entries with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def sample_channels(sys: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    return ChannelRealization(H=_cn(rng, (sys.K, sys.K, sys.nr, sys.nt)))


# ---------------------------------------------------------------------------
# quantization

def rvq_quantize(h: np.ndarray, bits: int, codebook_rng: np.random.Generator) -> QuantizedCSI:
    """Quantize the direction of h onto a fresh random codebook of 2^bits
    unit vectors, keeping the max-correlation codeword."""
    if bits > RVQ_MAX_BITS:
        raise RvqBudgetError(f"bits={bits} exceeds cap {RVQ_MAX_BITS}")
    h = np.asarray(h).ravel()
    nrm = np.linalg.norm(h)
    if nrm == 0.0:
        raise ValueError("cannot quantize the zero vector")
    hdir = h / nrm
    best_c, best_corr = None, -1.0
    remaining = 1 << int(bits)
    chunk = 1 << 16
    while remaining > 0:
        m = min(chunk, remaining)
        cw = _cn(codebook_rng, (m, h.size))
        cw /= np.linalg.norm(cw, axis=1, keepdims=True)
        corr = np.abs(cw @ hdir.conj()) ** 2
        j = int(np.argmax(corr))
        if corr[j] > best_corr:
            best_corr = float(corr[j])
            best_c = cw[j].copy()
        remaining -= m
    return QuantizedCSI(hhat=best_c, rho_actual=1.0 - best_corr, mode=RVQ)


def error_model_quantize(
    h: np.ndarray, bits: float, rng: np.random.Generator
) -> QuantizedCSI:
    """Statistical quantization: rho * ||h||^2 is gamma distributed with
    shape Nt*Nr - 1 and scale 2^(-bits/(Nt*Nr-1)); the error direction is
    isotropic in the orthogonal complement of the true direction.

    rho is clipped to 1 for the reported angle and the reconstruction (the
    gamma tail can exceed ||h||^2 at very small budgets).
    """
    h = np.asarray(h).ravel()
    n = h.size
    nrm2 = float(np.linalg.norm(h) ** 2)
    if nrm2 == 0.0:
        raise ValueError("cannot quantize the zero vector")
    hdir = h / math.sqrt(nrm2)
    if bits == math.inf:
        return QuantizedCSI(hhat=hdir, rho_actual=0.0, mode=ERROR_MODEL)
    delta = 2.0 ** (-float(bits) / (n - 1))
    g = float(rng.gamma(n - 1, delta))
    rho = min(g / nrm2, 1.0)
    s = _cn(rng, n)
    s -= (hdir.conj() @ s) * hdir
    s /= np.linalg.norm(s)
    hhat = math.sqrt(1.0 - rho) * hdir + math.sqrt(rho) * s
    hhat /= np.linalg.norm(hhat)
    return QuantizedCSI(hhat=hhat, rho_actual=rho, mode=ERROR_MODEL)


# ---------------------------------------------------------------------------
# iterative leakage minimization

def ia_solve(
    channels_hat: np.ndarray,
    d,
    max_iter: int = 500,
    tol: float = 1e-10,
) -> IASolution:
    """Alternating minimization of alignment leakage on the quantized
    channels channels_hat[k][i] (Nr x Nt).

    Per-iteration updates are least eigenvectors of the per-stream
    interference covariances (forward: combiners, reverse: precoders);
    total leakage is nonincreasing for single-stream configurations. The
    run is flagged (not failed) when max_iter is hit above tol.
    """
    Hh = np.asarray(channels_hat, dtype=complex)[None, ...]
    w, v, leak, iters, conv = _ia_solve_batch(Hh, tuple(int(x) for x in d), max_iter, tol)
    return IASolution(
        w=tuple(wi[0] for wi in w),
        v=tuple(vk[0] for vk in v),
        leakage=float(leak[0]),
        iterations=int(iters),
        converged=bool(conv[0]),
    )


def _least_eigvecs(Q: np.ndarray, count: int) -> np.ndarray:
    """count smallest-eigenvalue eigenvectors of stacked Hermitian Q
    -> (..., count, dim) with unit rows."""
    _, vecs = np.linalg.eigh(Q)
    out = np.swapaxes(vecs[..., :count], -1, -2)
    return out


def _ia_solve_batch(Hh: np.ndarray, d: tuple[int, ...], max_iter: int, tol: float):
    n, K = Hh.shape[0], Hh.shape[1]
    nr, nt = Hh.shape[3], Hh.shape[4]
    single = all(dk == 1 for dk in d)

    norm = np.zeros(n)
    for k in range(K):
        for i in range(K):
            if i != k or d[k] > 1:
                norm += np.sum(np.abs(Hh[:, k, i]) ** 2, axis=(1, 2))

    # transmit-side init: least-interfering directions of the aggregate
    # outgoing cross covariance (unitary-equivariant, deterministic)
    w = []
    for i in range(K):
        Q = np.zeros((n, nt, nt), dtype=complex)
        for k in range(K):
            if k != i:
                Q += np.einsum("nab,nac->nbc", Hh[:, k, i].conj(), Hh[:, k, i])
        w.append(_least_eigvecs(Q, d[i]))
    v = [np.zeros((n, d[k], nr), dtype=complex) for k in range(K)]

    def leakage(w, v):
        acc = np.zeros(n)
        for k in range(K):
            for j in range(d[k]):
                for i in range(K):
                    for l in range(d[i]):
                        if i == k and l == j:
                            continue
                        if i == k and d[k] == 1:
                            continue
                        u = np.einsum("nab,nb->na", Hh[:, k, i], w[i][:, l])
                        acc += np.abs(np.einsum("na,na->n", v[k][:, j].conj(), u)) ** 2
        return acc / norm

    converged = np.zeros(n, dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        # forward: combiners
        for k in range(K):
            for j in range(d[k]):
                Q = np.zeros((n, nr, nr), dtype=complex)
                for i in range(K):
                    for l in range(d[i]):
                        if i == k and (l == j or d[k] == 1):
                            continue
                        u = np.einsum("nab,nb->na", Hh[:, k, i], w[i][:, l])
                        Q += u[:, :, None] * u[:, None, :].conj()
                v[k][:, j] = _least_eigvecs(Q, 1)[:, 0]
        # reverse: precoders
        for i in range(K):
            for l in range(d[i]):
                Q = np.zeros((n, nt, nt), dtype=complex)
                for k in range(K):
                    for j in range(d[k]):
                        if k == i and (j == l or d[i] == 1):
                            continue
                        u = np.einsum("nab,na->nb", Hh[:, k, i].conj(), v[k][:, j])
                        Q += u[:, :, None] * u[:, None, :].conj()
                w[i][:, l] = _least_eigvecs(Q, 1)[:, 0]
            if d[i] > 1:
                # keep per-pair precoder columns orthonormal
                q, _ = np.linalg.qr(np.swapaxes(w[i], 1, 2))
                w[i] = np.swapaxes(q[:, :, : d[i]], 1, 2)
        leak = leakage(w, v)
        converged = leak <= tol
        if converged.all():
            break
    return w, v, leak, it, converged


# ---------------------------------------------------------------------------
# SINR

def sinr(sol: IASolution, channels: ChannelRealization, sys: SystemConfig, k: int, j: int) -> float:
    """Instantaneous SINR of stream j of pair k, evaluated on the true
    channels (direct leakage evaluation, not the error-model expansion)."""
    H = channels.H
    vk = sol.v[k][j]
    s = sys.kappa(k, k) * np.abs(vk.conj() @ H[k, k] @ sol.w[k][j]) ** 2
    interf = 0.0
    for i in range(sys.K):
        for l in range(sys.d[i]):
            if i == k and l == j:
                continue
            interf += sys.kappa(k, i) * np.abs(vk.conj() @ H[k, i] @ sol.w[i][l]) ** 2
    return float(s / (interf + 1.0))


# ---------------------------------------------------------------------------
# batched metric estimation

def _simulate_block(
    sys: SystemConfig,
    fb: FeedbackConfig,
    k: int,
    j: int,
    m: int,
    rng: np.random.Generator,
    mode: str,
    max_iter: int,
    tol: float,
    want: str = "sinr",
):
    """SINR (or residual-interference-power) samples for one block of m
    trials. Returns (samples, n_nonconverged)."""
    K, nr, nt = sys.K, sys.nr, sys.nt
    nn = sys.csi_dim
    Htrue = np.empty((m, K, K, nr, nt), dtype=complex)
    Hhat = np.empty_like(Htrue)

    for kk in range(K):
        for ii in range(K):
            needs_quant = (ii != kk) or sys.d[kk] > 1
            rho_zero = fb.rho(sys, kk, ii) == 0.0
            if mode == ERROR_MODEL and needs_quant and not rho_zero:
                # joint construction: quantized direction hhat isotropic,
                # error direction s orthogonal to it, residual energy G
                # exactly gamma distributed (the closed forms' assumption)
                hhat = _cn(rng, (m, nn))
                hhat /= np.linalg.norm(hhat, axis=1, keepdims=True)
                s = _cn(rng, (m, nn))
                s -= np.sum(hhat.conj() * s, axis=1, keepdims=True) * hhat
                s /= np.linalg.norm(s, axis=1, keepdims=True)
                delta = fb.rho(sys, kk, ii)
                G = rng.gamma(nn - 1, delta, size=m)
                W = rng.gamma(nn, 1.0, size=m)
                h = (
                    np.sqrt(np.maximum(W - G, 0.0))[:, None] * hhat
                    + np.sqrt(G)[:, None] * s
                )
                Htrue[:, kk, ii] = h.reshape(m, nr, nt)
                Hhat[:, kk, ii] = hhat.reshape(m, nr, nt)
            else:
                h = _cn(rng, (m, nn))
                Htrue[:, kk, ii] = h.reshape(m, nr, nt)
                if rho_zero or not needs_quant:
                    hd = h / np.linalg.norm(h, axis=1, keepdims=True)
                    Hhat[:, kk, ii] = hd.reshape(m, nr, nt)
                else:  # RVQ with an explicit codebook per trial
                    bits = fb.bits[kk][ii]
                    hq = np.empty((m, nn), dtype=complex)
                    for t in range(m):
                        hq[t] = rvq_quantize(h[t], int(bits), rng).hhat
                    Hhat[:, kk, ii] = hq.reshape(m, nr, nt)

    w, v, leak, _, conv = _ia_solve_batch(Hhat, sys.d, max_iter, tol)

    vk = v[k][:, j]
    sig = sys.kappa(k, k) * np.abs(
        np.einsum("na,nab,nb->n", vk.conj(), Htrue[:, k, k], w[k][:, j])
    ) ** 2
    interf = np.zeros(m)
    for i in range(K):
        for l in range(sys.d[i]):
            if i == k and l == j:
                continue
            interf += sys.kappa(k, i) * np.abs(
                np.einsum("na,nab,nb->n", vk.conj(), Htrue[:, k, i], w[i][:, l])
            ) ** 2
    gamma = sig / (interf + 1.0)
    if want == "interference":
        return interf, int(np.count_nonzero(~conv))
    return gamma, int(np.count_nonzero(~conv))


def simulate_sinr_samples(
    sys: SystemConfig,
    fb: FeedbackConfig,
    k: int,
    j: int = 0,
    trials: int = 100_000,
    seed: int = 0,
    mode: str = ERROR_MODEL,
    threads: int = 1,
    max_iter: int = 500,
    tol: float = 1e-10,
    want: str = "sinr",
) -> tuple[np.ndarray, int]:
    """SINR samples for `trials` independent channel/quantization draws.

    Deterministic for a given seed, independent of `threads`.
    """
    if mode not in (ERROR_MODEL, RVQ):
        raise ValueError(f"unknown quantization mode {mode!r}")
    if not feasibility_check(sys):
        raise InfeasibleConfigError(feasibility_diagnostic(sys))
    blocks = [
        (b, min(BLOCK_SIZE, trials - b * BLOCK_SIZE))
        for b in range((trials + BLOCK_SIZE - 1) // BLOCK_SIZE)
    ]

    def run(entry):
        b, m = entry
        return _simulate_block(
            sys, fb, k, j, m, block_rng(seed, b), mode, max_iter, tol, want
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(e) for e in blocks]
    gamma = np.concatenate([r[0] for r in results])
    bad = sum(r[1] for r in results)
    return gamma, bad


def simulate_interference_samples(
    sys: SystemConfig,
    fb: FeedbackConfig,
    k: int,
    j: int = 0,
    trials: int = 100_000,
    seed: int = 0,
    mode: str = ERROR_MODEL,
    threads: int = 1,
) -> tuple[np.ndarray, int]:
    """Residual interference power (the SINR denominator minus the unit
    noise term) per trial, for distribution-level validation."""
    return simulate_sinr_samples(
        sys, fb, k, j, trials, seed, mode, threads, want="interference"
    )


def _estimate(values: np.ndarray, trials: int, bad: int) -> MetricEstimate:
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return MetricEstimate(mean=mean, stderr=stderr, trials=trials, nonconverged=bad)


def estimate_outage(
    sys: SystemConfig, fb: FeedbackConfig, k: int, j: int, gamma_th: float,
    trials: int = 100_000, seed: int = 0, mode: str = ERROR_MODEL, threads: int = 1,
) -> MetricEstimate:
    if trials < 1000:
        raise ValueError("use at least 10^3 trials")
    gamma, bad = simulate_sinr_samples(sys, fb, k, j, trials, seed, mode, threads)
    return _estimate((gamma <= gamma_th).astype(float), trials, bad)


def estimate_rate(
    sys: SystemConfig, fb: FeedbackConfig, k: int, j: int,
    trials: int = 100_000, seed: int = 0, mode: str = ERROR_MODEL, threads: int = 1,
) -> MetricEstimate:
    if trials < 1000:
        raise ValueError("use at least 10^3 trials")
    gamma, bad = simulate_sinr_samples(sys, fb, k, j, trials, seed, mode, threads)
    return _estimate(np.log2(1.0 + gamma), trials, bad)


def estimate_ser(
    sys: SystemConfig, fb: FeedbackConfig, k: int, j: int, mod: Modulation,
    trials: int = 100_000, seed: int = 0, mode: str = ERROR_MODEL, threads: int = 1,
) -> MetricEstimate:
    """Semi-analytic SER: the conditional SER integral evaluated at each
    sampled SINR and averaged."""
    if trials < 1000:
        raise ValueError("use at least 10^3 trials")
    gamma, bad = simulate_sinr_samples(sys, fb, k, j, trials, seed, mode, threads)
    return _estimate(conditional_ser(gamma, mod), trials, bad)


def conditional_ser(gamma: np.ndarray, mod: Modulation, nodes: int = 96) -> np.ndarray:
    """SER at given SINR(s): fixed-order Gauss-Legendre evaluation of the
    angle integrals (the integrand is analytic on each sub-interval)."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    x, wts = np.polynomial.legendre.leggauss(nodes)
    out = np.zeros_like(gamma)
    g = mod.g
    for lo, hi, coef in mod.pieces:
        ang = (hi - lo) / 2.0 * x + (hi + lo) / 2.0
        ww = (hi - lo) / 2.0 * wts * coef
        s2 = np.sin(ang) ** 2
        # chunk to bound the (trials x nodes) temporary
        for a in range(0, gamma.size, 65536):
            sl = slice(a, min(a + 65536, gamma.size))
            out[sl] += np.exp(-np.outer(gamma[sl], g / s2)) @ ww
    return out
