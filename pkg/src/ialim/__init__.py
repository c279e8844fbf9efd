"""Exact performance analysis of interference alignment with quantized
CSI over MIMO interference channels, cross-checked by a Monte Carlo
link-level simulator.

Layers:

* :mod:`ialim.specfun` — scalar special functions (E1, incomplete gamma)
* :mod:`ialim.mixture` — signed Erlang mixtures (sums of gammas, exactly)
* :mod:`ialim.config` — system / feedback / modulation configuration
* :mod:`ialim.analysis` — closed-form outage, rate, SER and asymptotics
* :mod:`ialim.simulator` — channel sampling, quantization, IA, estimation
* :mod:`ialim.cli` — scenario files, sweeps, comparison, planning
"""

__version__ = "0.1.0"

from .config import (
    PERFECT,
    FeedbackConfig,
    InfeasibleConfigError,
    Modulation,
    SystemConfig,
    feasibility_check,
    feasibility_diagnostic,
    table1_system,
)
from .mixture import (
    ErlangMixture,
    GammaComponent,
    SourceSpec,
    build_mixture,
    make_source_spec,
    xi_weight,
)
from .analysis import (
    ergodic_rate,
    ergodic_rate_perfect,
    feedback_budget,
    min_uniform_bits,
    outage_floor,
    outage_loss,
    outage_perfect,
    outage_probability,
    rate_ceiling,
    rate_high_largeB,
    rate_loss,
    ser_average,
    ser_loss,
    ser_perfect,
)
from .simulator import (
    ChannelRealization,
    IASolution,
    MetricEstimate,
    QuantizedCSI,
    conditional_ser,
    error_model_quantize,
    estimate_outage,
    estimate_rate,
    estimate_ser,
    ia_solve,
    rvq_quantize,
    sample_channels,
    simulate_sinr_samples,
    sinr,
)

__all__ = [
    "__version__",
    "PERFECT",
    "FeedbackConfig",
    "InfeasibleConfigError",
    "Modulation",
    "SystemConfig",
    "feasibility_check",
    "feasibility_diagnostic",
    "table1_system",
    "ErlangMixture",
    "GammaComponent",
    "SourceSpec",
    "build_mixture",
    "make_source_spec",
    "xi_weight",
    "ergodic_rate",
    "ergodic_rate_perfect",
    "feedback_budget",
    "min_uniform_bits",
    "outage_floor",
    "outage_loss",
    "outage_perfect",
    "outage_probability",
    "rate_ceiling",
    "rate_high_largeB",
    "rate_loss",
    "ser_average",
    "ser_loss",
    "ser_perfect",
    "ChannelRealization",
    "IASolution",
    "MetricEstimate",
    "QuantizedCSI",
    "conditional_ser",
    "error_model_quantize",
    "estimate_outage",
    "estimate_rate",
    "estimate_ser",
    "ia_solve",
    "rvq_quantize",
    "sample_channels",
    "simulate_sinr_samples",
    "sinr",
]
