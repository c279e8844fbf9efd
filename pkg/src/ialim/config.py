"""System, feedback and modulation configuration shared by analysis and
Monte Carlo simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: sentinel for a perfectly known link (infinite feedback budget)
PERFECT = math.inf


class InfeasibleConfigError(ValueError):
    """The requested stream counts violate the alignment feasibility check."""


@dataclass(frozen=True)
class SystemConfig:
    """K transmitter-receiver pairs, Nt x Nr antennas, per-pair stream
    counts d, path-loss matrix alpha, transmit power p and noise sigma2.

    alpha[k][i] is the path loss from transmitter i to receiver k; the
    diagonal is conventionally normalized near 1 (not enforced).
    """

    K: int
    nt: int
    nr: int
    d: tuple[int, ...]
    alpha: tuple[tuple[float, ...], ...]
    p: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("need at least two pairs")
        if self.nt < 1 or self.nr < 1:
            raise ValueError("antenna counts must be >= 1")
        object.__setattr__(self, "d", tuple(int(x) for x in self.d))
        if len(self.d) != self.K:
            raise ValueError("need one stream count per pair")
        if any(dk < 1 for dk in self.d):
            raise ValueError("stream counts must be >= 1")
        object.__setattr__(
            self, "alpha", tuple(tuple(float(a) for a in row) for row in self.alpha)
        )
        if len(self.alpha) != self.K or any(len(r) != self.K for r in self.alpha):
            raise ValueError("alpha must be K x K")
        if any(a <= 0.0 for row in self.alpha for a in row):
            raise ValueError("path losses must be positive")
        if self.p <= 0.0 or self.sigma2 <= 0.0:
            raise ValueError("power and noise must be positive")

    @property
    def snr(self) -> float:
        """Transmit SNR p / sigma2 (linear)."""
        return self.p / self.sigma2

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)

    def kappa(self, k: int, i: int) -> float:
        """Per-stream received SNR scale p*alpha[k,i] / (d_i * sigma2)."""
        return self.p * self.alpha[k][i] / (self.d[i] * self.sigma2)

    @property
    def csi_dim(self) -> int:
        """Dimension of a vectorized channel, Nt*Nr."""
        return self.nt * self.nr

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        """Copy with transmit power set to sigma2 * 10^(snr_db/10)."""
        return SystemConfig(
            self.K, self.nt, self.nr, self.d, self.alpha,
            p=self.sigma2 * 10.0 ** (snr_db / 10.0), sigma2=self.sigma2,
        )


@dataclass(frozen=True)
class FeedbackConfig:
    """Per-link feedback budgets B[k][i] in bits; math.inf marks a
    perfectly known link."""

    bits: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "bits", tuple(tuple(float(b) for b in row) for row in self.bits)
        )
        for row in self.bits:
            for b in row:
                if b != PERFECT and (b < 0 or b != int(b)):
                    raise ValueError(f"budgets must be nonnegative integers or inf, got {b}")

    @classmethod
    def uniform(cls, K: int, bits: float) -> "FeedbackConfig":
        return cls(tuple(tuple(float(bits) for _ in range(K)) for _ in range(K)))

    def rho(self, sys: SystemConfig, k: int, i: int) -> float:
        """Quantization accuracy 2^(-B / (Nt*Nr - 1)); 0 for a perfect link."""
        b = self.bits[k][i]
        if b == PERFECT:
            return 0.0
        return 2.0 ** (-b / (sys.csi_dim - 1))

    def varrho(self, sys: SystemConfig, k: int, i: int) -> float:
        """Effective interference scale kappa[k,i] * rho[k,i]."""
        return sys.kappa(k, i) * self.rho(sys, k, i)

    def rate(self, sys: SystemConfig, k: int, i: int) -> float:
        """Exponential rate 1 / varrho for the single-stream law."""
        return 1.0 / self.varrho(sys, k, i)

    def xi(self, sys: SystemConfig, k: int, i: int) -> float:
        """SNR-free scale alpha[k,i] * rho[k,i] / d_i (high-SNR analysis)."""
        return sys.alpha[k][i] * self.rho(sys, k, i) / sys.d[i]

    def all_perfect(self) -> bool:
        return all(b == PERFECT for row in self.bits for b in row)


@dataclass(frozen=True)
class Modulation:
    """PSK / PAM / QAM constellation of order M.

    `pieces` enumerates the angle sub-intervals of the conditional-SER
    integral as (lo, hi, coefficient); the integrand on each piece is
    coefficient * T(g / sin^2 x) for the metric-specific kernel T.
    """

    family: str
    order: int

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in ("psk", "pam", "qam"):
            raise ValueError(f"unknown modulation family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if self.order < 2:
            raise ValueError("modulation order must be >= 2")
        if fam == "qam" and (self.order & (self.order - 1)):
            raise ValueError("QAM order must be a power of 2")

    @property
    def g(self) -> float:
        M = self.order
        if self.family == "psk":
            return math.sin(math.pi / M) ** 2
        if self.family == "pam":
            return 3.0 / (M * M - 1.0)
        return 3.0 / (2.0 * (M - 1.0))

    @property
    def pieces(self) -> tuple[tuple[float, float, float], ...]:
        M = self.order
        if self.family == "psk":
            return ((0.0, (M - 1) * math.pi / M, 1.0 / math.pi),)
        if self.family == "pam":
            return ((0.0, math.pi / 2.0, 2.0 * (M - 1) / (M * math.pi)),)
        c = 4.0 / math.pi * (1.0 - 1.0 / math.sqrt(M))
        return (
            (0.0, math.pi / 4.0, c / math.sqrt(M)),
            (math.pi / 4.0, math.pi / 2.0, c),
        )

    def label(self) -> str:
        return f"{self.order}{self.family.upper()}"


def feasibility_check(sys: SystemConfig) -> bool:
    """Heuristic alignment feasibility test.

    Symmetric stream counts use Nt + Nr >= (K+1) d; otherwise the
    proper-system count (free transmit/receive variables vs inter-link
    zero-forcing constraints) is applied. Passing this check does not
    guarantee that the iterative solver converges.
    """
    if len(set(sys.d)) == 1:
        return sys.nt + sys.nr >= (sys.K + 1) * sys.d[0]
    free = sum(dk * (sys.nt - dk) + dk * (sys.nr - dk) for dk in sys.d)
    constraints = sum(
        sys.d[k] * sys.d[i]
        for k in range(sys.K)
        for i in range(sys.K)
        if i != k
    )
    return free >= constraints


def feasibility_diagnostic(sys: SystemConfig) -> str:
    ok = feasibility_check(sys)
    if len(set(sys.d)) == 1:
        lhs, rhs = sys.nt + sys.nr, (sys.K + 1) * sys.d[0]
        detail = f"Nt+Nr={lhs} vs (K+1)d={rhs}"
    else:
        free = sum(dk * (sys.nt - dk) + dk * (sys.nr - dk) for dk in sys.d)
        cons = sum(
            sys.d[k] * sys.d[i] for k in range((sys.K)) for i in range(sys.K) if i != k
        )
        detail = f"free variables {free} vs constraints {cons}"
    return f"{'feasible' if ok else 'infeasible'} ({detail}); heuristic only"


def table1_system(snr_db: float = 10.0, d: int = 1) -> SystemConfig:
    """The reference 3-pair scenario: Nt=4, Nr=2, unit noise, path-loss
    matrix with near-unit direct links and weak cross links."""
    alpha = (
        (1.000, 0.050, 0.005),
        (0.055, 1.000, 0.045),
        (0.004, 0.060, 1.000),
    )
    return SystemConfig(
        K=3, nt=4, nr=2, d=(d, d, d), alpha=alpha,
        p=10.0 ** (snr_db / 10.0), sigma2=1.0,
    )
