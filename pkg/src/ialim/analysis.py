"""Closed-form performance of interference alignment under quantized CSI.

Residual interference at pair k is a sum of independent integer-shape
gamma terms, one per imperfectly known link; every metric below reduces
to a functional of the resulting signed Erlang mixture:

  outage   -> Laplace transform of the mixture,
  rate     -> E[ln(1+X)] of signal-plus-interference minus interference,
  SER      -> angle-domain quadrature of a per-component closed form.

Two gamma parametrizations of the interference terms are supported; the
default ("distribution", per-source scale varrho) is the one the Monte
Carlo simulator validates, the alternative ("literal", scale varrho/shape)
is kept behind the `parametrization` switch.
"""

from __future__ import annotations

import math
from math import log

import numpy as np
from scipy.integrate import quad

from .config import (
    FeedbackConfig,
    InfeasibleConfigError,
    Modulation,
    SystemConfig,
    feasibility_check,
    feasibility_diagnostic,
)
from .mixture import ErlangMixture, SourceSpec, build_mixture, make_source_spec
from .specfun import (
    EULER_GAMMA,
    exp_integral_e1_scaled,
    gamma_log1p_expectation,
    upper_incomplete_gamma_int_scaled,
)

LN2 = math.log(2.0)

DISTRIBUTION = "distribution"
LITERAL = "literal"


class QuadratureError(RuntimeError):
    """SER quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, value: float, error_estimate: float):
        super().__init__(f"{message} (value {value:.6g}, error estimate {error_estimate:.2g})")
        self.value = value
        self.error_estimate = error_estimate


def _check_feasible(sys: SystemConfig):
    if not feasibility_check(sys):
        raise InfeasibleConfigError(feasibility_diagnostic(sys))


def _component_scale(varrho: float, shape: int, parametrization: str) -> float:
    if parametrization == DISTRIBUTION:
        return varrho
    if parametrization == LITERAL:
        return varrho / shape
    raise ValueError(f"unknown parametrization {parametrization!r}")


def interference_spec(
    sys: SystemConfig,
    fb: FeedbackConfig,
    k: int,
    parametrization: str = DISTRIBUTION,
    snr_free: bool = False,
) -> SourceSpec:
    """Gamma sources of the residual interference at pair k.

    Cross links contribute shape d_i, the own link shape d_k - 1
    (inter-stream leakage); perfect links contribute nothing. With
    snr_free=True the scales are the high-SNR xi values alpha*rho/d
    instead of kappa*rho.
    """
    shapes, scales = [], []
    for i in range(sys.K):
        shape = sys.d[i] if i != k else sys.d[k] - 1
        if shape == 0 or fb.rho(sys, k, i) == 0.0:
            continue
        raw = fb.xi(sys, k, i) if snr_free else fb.varrho(sys, k, i)
        shapes.append(shape)
        scales.append(_component_scale(raw, shape, parametrization))
    return make_source_spec(shapes, scales)


def signal_plus_interference_spec(
    sys: SystemConfig,
    fb: FeedbackConfig,
    k: int,
    parametrization: str = DISTRIBUTION,
    snr_free: bool = False,
) -> SourceSpec:
    """Interference sources plus the unit-shape desired-signal source."""
    base = interference_spec(sys, fb, k, parametrization, snr_free)
    signal_scale = (
        sys.alpha[k][k] / sys.d[k] if snr_free else sys.kappa(k, k)
    )
    return make_source_spec(
        list(base.shapes) + [1], list(base.scales) + [signal_scale]
    )


def interference_mixture(
    sys: SystemConfig, fb: FeedbackConfig, k: int,
    parametrization: str = DISTRIBUTION,
) -> ErlangMixture:
    return build_mixture(interference_spec(sys, fb, k, parametrization))


# ---------------------------------------------------------------------------
# outage probability

def outage_probability(
    sys: SystemConfig, fb: FeedbackConfig, k: int, gamma_th: float,
    parametrization: str = DISTRIBUTION,
) -> float:
    """P(SINR <= gamma_th) for any stream of pair k (stream-index free)."""
    _check_feasible(sys)
    if gamma_th < 0.0:
        raise ValueError("gamma_th must be nonnegative")
    mix = interference_mixture(sys, fb, k, parametrization)
    if mix.is_degenerate:
        return outage_perfect(sys, k, gamma_th)
    s = gamma_th / sys.kappa(k, k)
    return 1.0 - math.exp(-s) * mix.laplace(s)


def outage_single_stream(
    sys: SystemConfig, fb: FeedbackConfig, k: int, gamma_th: float
) -> float:
    """Single-data-stream outage via the hypoexponential partial fractions."""
    if any(dk != 1 for dk in sys.d):
        raise ValueError("single-stream form requires all d_i = 1")
    lam = [
        fb.rate(sys, k, i)
        for i in range(sys.K)
        if i != k and fb.rho(sys, k, i) > 0.0
    ]
    if not lam:
        return outage_perfect(sys, k, gamma_th)
    s = gamma_th / sys.kappa(k, k)
    pref = math.prod(lam)
    acc = 0.0
    for i, li in enumerate(lam):
        denom = math.prod(lj - li for j, lj in enumerate(lam) if j != i)
        if denom == 0.0:
            raise ValueError("duplicate rates; merge/perturb scales first")
        acc += 1.0 / ((s + li) * denom)
    return 1.0 - math.exp(-s) * pref * acc


def outage_perfect(sys: SystemConfig, k: int, gamma_th: float) -> float:
    """Outage with complete interference cancellation."""
    if gamma_th < 0.0:
        raise ValueError("gamma_th must be nonnegative")
    return -math.expm1(-gamma_th / sys.kappa(k, k))


def outage_floor(
    sys: SystemConfig, fb: FeedbackConfig, k: int, gamma_th: float,
    parametrization: str = DISTRIBUTION,
) -> float:
    """SNR-independent high-SNR outage limit (depends only on alpha, rho, d)."""
    _check_feasible(sys)
    mix = interference_mixture(sys, fb, k, parametrization)
    if mix.is_degenerate:
        return 0.0
    # scale ratios theta/kappa are SNR-free, so the current-SNR mixture works
    return 1.0 - mix.laplace(gamma_th / sys.kappa(k, k))


def outage_loss(
    sys: SystemConfig, fb: FeedbackConfig, k: int, gamma_th: float,
    parametrization: str = DISTRIBUTION,
) -> float:
    return outage_probability(sys, fb, k, gamma_th, parametrization) - outage_perfect(
        sys, k, gamma_th
    )


# ---------------------------------------------------------------------------
# ergodic rate

def z_term(t: int, theta: float) -> float:
    """E[ln(1+X)] for X ~ Gamma(t, theta)."""
    return gamma_log1p_expectation(t, theta)


def ergodic_rate(
    sys: SystemConfig, fb: FeedbackConfig, k: int,
    parametrization: str = DISTRIBUTION,
) -> float:
    """E[log2(1 + SINR)] in bits/s/Hz for any stream of pair k."""
    _check_feasible(sys)
    imix = interference_mixture(sys, fb, k, parametrization)
    if imix.is_degenerate:
        return ergodic_rate_perfect(sys, k)
    smix = build_mixture(signal_plus_interference_spec(sys, fb, k, parametrization))
    return (smix.log1p_moment() - imix.log1p_moment()) / LN2


def ergodic_rate_single_stream(
    sys: SystemConfig, fb: FeedbackConfig, k: int
) -> float:
    """Single-stream rate via exponential rates lambda = 1/varrho."""
    if any(dk != 1 for dk in sys.d):
        raise ValueError("single-stream form requires all d_i = 1")
    lam_int = [
        fb.rate(sys, k, i)
        for i in range(sys.K)
        if i != k and fb.rho(sys, k, i) > 0.0
    ]
    if not lam_int:
        return ergodic_rate_perfect(sys, k)
    lam_all = lam_int + [1.0 / sys.kappa(k, k)]
    return (_hypoexp_log1p(lam_all) - _hypoexp_log1p(lam_int)) / LN2


def _hypoexp_log1p(rates: list[float]) -> float:
    """E[ln(1+X)] for a hypoexponential X, via exp(l)E1(l) per component."""
    if len(rates) == 1:
        li = rates[0]
        return exp_integral_e1_scaled(li)
    total = 0.0
    pref = math.prod(rates)
    for i, li in enumerate(rates):
        denom = math.prod(lj - li for j, lj in enumerate(rates) if j != i)
        if denom == 0.0:
            raise ValueError("duplicate rates; merge/perturb scales first")
        total += exp_integral_e1_scaled(li) / (li * denom)
    return pref * total


def ergodic_rate_perfect(sys: SystemConfig, k: int) -> float:
    """Rate with complete cancellation: exp(1/kappa) E1(1/kappa) / ln 2."""
    return exp_integral_e1_scaled(1.0 / sys.kappa(k, k)) / LN2


def rate_ceiling(
    sys: SystemConfig, fb: FeedbackConfig, k: int,
    parametrization: str = DISTRIBUTION,
) -> float:
    """SNR-independent high-SNR rate limit under fixed CSI accuracy."""
    _check_feasible(sys)
    ispec = interference_spec(sys, fb, k, parametrization, snr_free=True)
    if ispec.count == 0:
        raise ValueError("perfect CSI has no rate ceiling")
    imix = build_mixture(ispec)
    smix = build_mixture(
        signal_plus_interference_spec(sys, fb, k, parametrization, snr_free=True)
    )
    return (smix.log_moment() - imix.log_moment()) / LN2


def rate_loss(
    sys: SystemConfig, fb: FeedbackConfig, k: int,
    parametrization: str = DISTRIBUTION,
) -> float:
    return ergodic_rate_perfect(sys, k) - ergodic_rate(sys, fb, k, parametrization)


def _uniform_bits(sys: SystemConfig, fb: FeedbackConfig, k: int) -> float:
    relevant = [
        fb.bits[k][i]
        for i in range(sys.K)
        if (i != k and sys.d[i] > 0) or (i == k and sys.d[k] > 1)
    ]
    if len(set(relevant)) != 1 or relevant[0] == math.inf:
        raise ValueError("asymptotic form requires one uniform finite budget")
    return relevant[0]


def rate_high_largeB(
    sys: SystemConfig, fb: FeedbackConfig, k: int,
    parametrization: str = DISTRIBUTION,
) -> float:
    """High-SNR, large-B rate: linear in B with slope 1/(Nt*Nr - 1)."""
    bits = _uniform_bits(sys, fb, k)
    return (
        bits / (sys.csi_dim - 1)
        + (log(sys.alpha[k][k] / sys.d[k]) - EULER_GAMMA) / LN2
        - _budget_free_log_moment(sys, k, parametrization) / LN2
    )


def rate_loss_high_largeB(
    sys: SystemConfig, fb: FeedbackConfig, k: int,
    parametrization: str = DISTRIBUTION,
) -> float:
    """High-SNR, large-B rate loss: grows as log2(SNR) at fixed B."""
    bits = _uniform_bits(sys, fb, k)
    return (
        math.log2(sys.snr)
        - bits / (sys.csi_dim - 1)
        + _budget_free_log_moment(sys, k, parametrization) / LN2
    )


def _budget_free_log_moment(sys: SystemConfig, k: int, parametrization: str) -> float:
    # E[ln X] of the interference mixture with the common 2^(-B/(NtNr-1))
    # factor stripped from every scale (weights are scale-ratio invariants).
    shapes, scales = [], []
    for i in range(sys.K):
        shape = sys.d[i] if i != k else sys.d[k] - 1
        if shape == 0:
            continue
        shapes.append(shape)
        scales.append(
            _component_scale(sys.alpha[k][i] / sys.d[i], shape, parametrization)
        )
    mix = build_mixture(make_source_spec(shapes, scales))
    return mix.log_moment()


# ---------------------------------------------------------------------------
# symbol error rate

_QUAD_ABS_TOL = 1e-10
_QUAD_REL_TOL = 1e-8


def _ser_component_kernel(t: int, theta: float, b: float, kappa: float) -> float:
    """Average of exp(-b*gamma) over the conditional SINR law, for one
    Erlang interference component: 1 - b*kappa (1+b*kappa)^(t-1)
    exp(z) Gamma(1-t, z) / theta^t with z = (1+b*kappa)/theta."""
    c = 1.0 + b * kappa
    z = c / theta
    return 1.0 - b * kappa * c ** (t - 1) * upper_incomplete_gamma_int_scaled(1 - t, z) / theta**t


def _quad_pieces(integrand, pieces) -> float:
    total, err_total = 0.0, 0.0
    for lo, hi, coef in pieces:
        val, err, info = quad(
            integrand, lo, hi,
            epsabs=_QUAD_ABS_TOL, epsrel=_QUAD_REL_TOL, limit=200, full_output=1,
        )[:3]
        total += coef * val
        err_total += coef * err
        if err > 10.0 * max(_QUAD_ABS_TOL, _QUAD_REL_TOL * abs(val)):
            raise QuadratureError("SER quadrature did not converge", coef * val, coef * err)
    return total


def ser_average(
    sys: SystemConfig, fb: FeedbackConfig, k: int, mod: Modulation,
    parametrization: str = DISTRIBUTION,
) -> float:
    """Average SER of pair k under quantized CSI."""
    _check_feasible(sys)
    mix = interference_mixture(sys, fb, k, parametrization)
    if mix.is_degenerate:
        return ser_perfect(sys, k, mod)
    kappa = sys.kappa(k, k)
    g = mod.g

    def integrand(x: float) -> float:
        s2 = math.sin(x) ** 2
        if s2 == 0.0:
            return 0.0
        b = g / s2
        return math.fsum(
            c.weight * _ser_component_kernel(c.shape, c.scale, b, kappa)
            for c in mix.components
        )

    return _quad_pieces(integrand, mod.pieces)


def ser_single_stream(
    sys: SystemConfig, fb: FeedbackConfig, k: int, mod: Modulation
) -> float:
    """Single-stream SER via the hypoexponential rates lambda = 1/varrho."""
    if any(dk != 1 for dk in sys.d):
        raise ValueError("single-stream form requires all d_i = 1")
    lam = [
        fb.rate(sys, k, i)
        for i in range(sys.K)
        if i != k and fb.rho(sys, k, i) > 0.0
    ]
    if not lam:
        return ser_perfect(sys, k, mod)
    kappa = sys.kappa(k, k)
    g = mod.g
    weights = []
    for i, li in enumerate(lam):
        denom = math.prod(lj - li for j, lj in enumerate(lam) if j != i)
        weights.append(math.prod(lam) / (li * denom) if len(lam) > 1 else 1.0)

    def integrand(x: float) -> float:
        s2 = math.sin(x) ** 2
        if s2 == 0.0:
            return 0.0
        b = g / s2
        c = 1.0 + b * kappa
        return math.fsum(
            w * (1.0 - b * kappa * li * exp_integral_e1_scaled(c * li))
            for w, li in zip(weights, lam)
        )

    return _quad_pieces(integrand, mod.pieces)


def ser_perfect(sys: SystemConfig, k: int, mod: Modulation) -> float:
    """SER with complete cancellation: quadrature of a/(1 + b*kappa)."""
    kappa = sys.kappa(k, k)
    g = mod.g

    def integrand(x: float) -> float:
        s2 = math.sin(x) ** 2
        return s2 / (s2 + g * kappa)

    return _quad_pieces(integrand, mod.pieces)


def ser_loss(
    sys: SystemConfig, fb: FeedbackConfig, k: int, mod: Modulation,
    parametrization: str = DISTRIBUTION,
) -> float:
    return ser_average(sys, fb, k, mod, parametrization) - ser_perfect(sys, k, mod)


# ---------------------------------------------------------------------------
# feedback planning

PLANNER_POLICIES = ("constant-outage-gap", "constant-rate-gap")


def feedback_budget(
    sys: SystemConfig,
    k: int,
    snr_grid: list[float],
    policy: str = "constant-outage-gap",
    base_bits: int = 4,
    base_snr: float | None = None,
) -> list[int]:
    """Per-link bit budgets along an ascending linear-SNR grid.

    Both policies track the same slope: B grows by Nt*Nr - 1 bits per
    doubling of SNR, keeping SNR * rho (hence the outage or rate gap)
    constant.
    """
    if policy not in PLANNER_POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if not snr_grid or any(s <= 0.0 for s in snr_grid):
        raise ValueError("snr_grid must be nonempty and positive")
    if any(b > a for a, b in zip(snr_grid, snr_grid[1:])):
        pass  # descending grids are fine; budgets just shrink
    ref = snr_grid[0] if base_snr is None else base_snr
    n1 = sys.csi_dim - 1
    return [
        max(0, base_bits + math.ceil(n1 * math.log2(ups / ref)))
        for ups in snr_grid
    ]


def min_uniform_bits(
    sys: SystemConfig,
    k: int,
    target: float,
    gamma_th: float = 1.0,
    metric: str = "outage_floor",
    max_bits: int = 512,
) -> int:
    """Smallest uniform budget B whose floor (or rate gap) meets `target`,
    found by monotone bisection over integers."""

    def value(bits: int) -> float:
        fb = FeedbackConfig.uniform(sys.K, bits)
        if metric == "outage_floor":
            return outage_floor(sys, fb, k, gamma_th)
        if metric == "rate_gap":
            return rate_loss(sys, fb, k)
        raise ValueError(f"unknown metric {metric!r}")

    if not 0.0 < target:
        raise ValueError("target must be positive")
    if metric == "outage_floor" and target >= 1.0:
        raise ValueError("outage floor target must be below 1")
    if value(0) <= target:
        return 0
    if value(max_bits) > target:
        raise ValueError(f"target {target} unattainable within {max_bits} bits")
    lo, hi = 0, max_bits  # value(lo) > target >= value(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if value(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi
