"""Signed Erlang mixtures: the exact law of a sum of independent gammas.

A sum of independent Gamma(shape_i, scale_i) variables with integer shapes
and pairwise distinct scales has density

    sum_i sum_{t=1..shape_i} w(i,t) * v(x, t, scale_i),

where v(x, y, z) = x^(y-1) exp(-x/z) / (z^y Gamma(y)) is the Erlang pdf.
The signed weights w(i,t) are the partial-fraction coefficients of the
product of the component Laplace transforms; they sum to 1 but individual
weights can be large and of either sign, so they are computed with
compensated summation and re-derived in high precision if the
normalization check fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special as sps

#: sources whose scales differ by less than this (relatively) are merged
MERGE_REL_TOL = 1e-9
#: below this relative gap, distinct scales are nudged apart to bound
#: cancellation in the weights (documented approximation)
PERTURB_REL_GAP = 1e-6
PERTURB_SIZE = 1e-6

WEIGHT_SUM_TOL = 1e-6


class DuplicateScaleError(ValueError):
    """Two sources share a scale; weights would divide by zero."""


class DegenerateSpecError(ValueError):
    """Fewer than two sources; the mixture is a single Erlang."""


@dataclass(frozen=True)
class GammaComponent:
    shape: int
    scale: float
    weight: float


@dataclass(frozen=True)
class SourceSpec:
    """Shapes and scales of the independent gamma sources being summed.

    Zero-shape entries must be dropped before construction (use
    :func:`make_source_spec`).
    """

    shapes: tuple[int, ...]
    scales: tuple[float, ...]

    def __post_init__(self):
        if len(self.shapes) != len(self.scales):
            raise ValueError("shapes and scales must have equal length")
        for s in self.shapes:
            if s < 1 or s != int(s):
                raise ValueError(f"shapes must be positive integers, got {s}")
        for z in self.scales:
            if not (z > 0.0) or not math.isfinite(z):
                raise ValueError(f"scales must be positive and finite, got {z}")

    @property
    def count(self) -> int:
        return len(self.shapes)

    @property
    def total_shape(self) -> int:
        return sum(self.shapes)


def make_source_spec(shapes: Sequence[int], scales: Sequence[float]) -> SourceSpec:
    """Build a SourceSpec: drop zero-shape sources, merge equal scales,
    and nudge near-equal scales apart.

    Merging sources with (relatively) equal scales into one source with
    summed shape is exact. The multiplicative +/-PERTURB_SIZE nudge applied
    to near-equal but unequal scales is an approximation that bounds
    cancellation in the signed weights.
    """
    pairs = [(int(s), float(z)) for s, z in zip(shapes, scales, strict=True) if s > 0]
    if not pairs:
        return SourceSpec((), ())
    pairs.sort(key=lambda p: p[1])
    zmax = max(z for _, z in pairs)
    # merge pass (exact)
    merged: list[list[float]] = []
    for s, z in pairs:
        if merged and abs(z - merged[-1][1]) <= MERGE_REL_TOL * zmax:
            merged[-1][0] += s
        else:
            merged.append([s, z])
    # perturbation pass for surviving near-equal neighbours
    out_shapes = [int(s) for s, _ in merged]
    out_scales = [z for _, z in merged]
    for j in range(1, len(out_scales)):
        gap = out_scales[j] - out_scales[j - 1]
        if gap < PERTURB_REL_GAP * out_scales[j]:
            out_scales[j - 1] *= 1.0 - PERTURB_SIZE
            out_scales[j] *= 1.0 + PERTURB_SIZE
    return SourceSpec(tuple(out_shapes), tuple(out_scales))


def _weight_table(shapes: Sequence[int], scales: Sequence[float], hp: bool = False):
    """Partial-fraction weights w[i][t-1], t = 1..shapes[i].

    For source i with scale z_i, the remaining factors
    prod_{j!=i} (1 - z_j s)^(-shape_j) are Taylor-expanded around the pole
    s = 1/z_i in the variable u = 1 - z_i s via the log-derivative
    recurrence; coefficient of u^m is the weight of order t = shape_i - m.
    With hp=True the arithmetic runs in mpmath (cancellation fallback).
    """
    if hp:
        import mpmath as mp

        mp.mp.dps = 60
        conv = mp.mpf
        fsum = mp.fsum
    else:
        conv = float
        fsum = math.fsum

    n = len(shapes)
    table: list[list[float]] = []
    for i in range(n):
        zi = conv(scales[i])
        others = [(shapes[j], conv(scales[j])) for j in range(n) if j != i]
        a0 = 1
        for sj, zj in others:
            a0 *= (zi / (zi - zj)) ** sj
        b = [zj / (zi - zj) for _, zj in others]
        eta = [sj for sj, _ in others]
        coeffs = [a0]
        mmax = shapes[i] - 1
        for m in range(mmax):
            # (m+1) a_{m+1} = sum_{r<=m} h_r a_{m-r},
            # h_r = sum_j eta_j (-1)^(r+1) b_j^(r+1)
            terms = []
            for r in range(m + 1):
                h_r = fsum(ej * (-1) ** (r + 1) * bj ** (r + 1) for ej, bj in zip(eta, b))
                terms.append(h_r * coeffs[m - r])
            coeffs.append(fsum(terms) / (m + 1))
        # coeffs[m] multiplies (1 - z_i s)^-(shape_i - m)
        table.append([float(coeffs[shapes[i] - t]) for t in range(1, shapes[i] + 1)])
    return table


def _checked_weights(spec: SourceSpec):
    table = _weight_table(spec.shapes, spec.scales)
    total = math.fsum(w for row in table for w in row)
    if abs(total - 1.0) > 1e-12:
        # double-precision drift: recompute in high precision
        table = _weight_table(spec.shapes, spec.scales, hp=True)
        total = math.fsum(w for row in table for w in row)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ArithmeticError(
                f"mixture weights sum to {total}, not 1; scales too clustered "
                "for double-precision evaluation even after the merge/nudge pass"
            )
    # fold the residual rounding defect into the largest-magnitude weight:
    # a change below that weight's own representation error, making the
    # normalization identity exact in float arithmetic
    resid = 1.0 - total
    if resid != 0.0:
        bi, bt, bw = 0, 0, 0.0
        for i, row in enumerate(table):
            for t, w in enumerate(row):
                if abs(w) > abs(bw):
                    bi, bt, bw = i, t, w
        table[bi][bt] = bw + resid
    return table


def xi_weight(spec: SourceSpec, i: int, t: int) -> float:
    """Weight of the order-t Erlang component contributed by source i."""
    if spec.count < 2:
        raise DegenerateSpecError("need >= 2 sources; a single source is one Erlang")
    _check_distinct(spec.scales)
    if not 1 <= t <= spec.shapes[i]:
        raise ValueError(f"order t={t} outside [1, {spec.shapes[i]}]")
    return _checked_weights(spec)[i][t - 1]


def _check_distinct(scales: Sequence[float]):
    zmax = max(scales)
    z = sorted(scales)
    for a, b in zip(z, z[1:]):
        if abs(b - a) <= MERGE_REL_TOL * zmax:
            raise DuplicateScaleError(
                f"scales {a} and {b} coincide; merge sources first (make_source_spec)"
            )


@dataclass(frozen=True)
class ErlangMixture:
    """Signed weighted sum of integer-shape gamma densities.

    An empty component tuple represents the degenerate point mass at 0
    (no interference): pdf is 0 for x > 0 and cdf is 1 for x >= 0.
    """

    components: tuple[GammaComponent, ...]

    @property
    def is_degenerate(self) -> bool:
        return not self.components

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in self.components:
            out += c.weight * _erlang_pdf(x, c.shape, c.scale)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_degenerate:
            out = np.where(x >= 0.0, 1.0, 0.0)
            return out if out.ndim else float(out)
        out = np.zeros_like(x)
        for c in self.components:
            out += c.weight * sps.gammainc(c.shape, np.maximum(x, 0.0) / c.scale)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        return math.fsum(c.weight * c.shape * c.scale for c in self.components)

    def laplace(self, s: float) -> float:
        """E[exp(-sX)] = sum w (1 + s*scale)^-shape, for s >= 0."""
        return math.fsum(
            c.weight * (1.0 + s * c.scale) ** (-c.shape) for c in self.components
        ) if self.components else 1.0

    def log1p_moment(self) -> float:
        """E[ln(1+X)] via the per-component closed form."""
        from .specfun import gamma_log1p_expectation

        return math.fsum(
            c.weight * gamma_log1p_expectation(c.shape, c.scale)
            for c in self.components
        )

    def log_moment(self) -> float:
        """E[ln X] = sum w (psi(shape) + ln scale)."""
        from .specfun import gamma_log_expectation

        if self.is_degenerate:
            raise ValueError("log moment of the point mass at 0 diverges")
        return math.fsum(
            c.weight * gamma_log_expectation(c.shape, c.scale)
            for c in self.components
        )


def _erlang_pdf(x, shape: int, scale: float):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = (
            (shape - 1) * np.log(x)
            - x / scale
            - shape * math.log(scale)
            - math.lgamma(shape)
        )
        out = np.where(x > 0.0, np.exp(logp), 0.0)
    if shape == 1:
        out = np.where(x == 0.0, 1.0 / scale, out)
    return out


def build_mixture(spec: SourceSpec) -> ErlangMixture:
    """Exact mixture representation of the sum of the spec's gamma sources."""
    if spec.count == 0:
        return ErlangMixture(())
    if spec.count == 1:
        return ErlangMixture(
            (GammaComponent(spec.shapes[0], spec.scales[0], 1.0),)
        )
    _check_distinct(spec.scales)
    table = _checked_weights(spec)
    comps = [
        GammaComponent(t, spec.scales[i], table[i][t - 1])
        for i in range(spec.count)
        for t in range(1, spec.shapes[i] + 1)
    ]
    return ErlangMixture(tuple(comps))


def hypoexp_pdf(rates: Sequence[float], x) -> np.ndarray | float:
    """Density of a sum of independent exponentials with distinct rates."""
    rates = [float(r) for r in rates]
    if not rates:
        raise ValueError("need at least one rate")
    for r in rates:
        if r <= 0.0:
            raise ValueError(f"rates must be positive, got {r}")
    _check_distinct([1.0 / r for r in rates])
    x = np.asarray(x, dtype=float)
    if len(rates) == 1:
        lam = rates[0]
        out = np.where(x >= 0.0, lam * np.exp(-lam * x), 0.0)
        return out if out.ndim else float(out)
    prefactor = math.prod(rates)
    out = np.zeros_like(x)
    for i, li in enumerate(rates):
        denom = math.prod(lj - li for j, lj in enumerate(rates) if j != i)
        out += np.exp(-li * x) / denom
    out = np.where(x >= 0.0, prefactor * out, 0.0)
    return out if out.ndim else float(out)
