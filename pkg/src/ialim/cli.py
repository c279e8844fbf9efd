"""Batch front end: scenario files, sweep execution, theory-vs-simulation
comparison, feedback planning and figure-data emission.

Subcommands:

* ``analyze``  — closed-form metrics over the sweep grid
* ``simulate`` — Monte Carlo estimates over the sweep grid
* ``compare``  — paired theory/MC table with z-scores and a 3-s.e. gate
* ``plan``     — feedback budget schedules over an SNR grid
* ``preset``   — canned scenarios (fig2..fig9) written to CSV

Exit codes: 0 success, 2 configuration error, 3 compare-gate failure,
4 solver non-convergence above the threshold fraction (0.1%).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys as _sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import analysis as an
from . import simulator as sim
from .config import (
    FeedbackConfig,
    InfeasibleConfigError,
    Modulation,
    SystemConfig,
    feasibility_check,
    feasibility_diagnostic,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_NONCONVERGED = 4

COMPARE_Z_GATE = 3.0
NONCONVERGED_FRACTION = 1e-3

_TABLE1_ALPHA = (
    1.000, 0.050, 0.005,
    0.055, 1.000, 0.045,
    0.004, 0.060, 1.000,
)


class ScenarioError(ValueError):
    """Scenario parse/validation failure, with the offending field named."""


@dataclass(frozen=True)
class Scenario:
    """One sweep: a system template plus snr/bits/stream-count axes."""

    K: int
    nt: int
    nr: int
    d_variants: tuple[tuple[int, ...], ...]
    alpha: tuple[float, ...]  # row-major, length K*K
    snr_db: tuple[float, ...]
    bits: tuple[float, ...]  # math.inf marks perfect CSI
    sigma2: float = 1.0
    p_dbm_or_linear: str = "linear"
    gamma_th_db: float = 0.0
    modulation: Modulation = Modulation("psk", 8)
    metrics: tuple[str, ...] = ("outage", "rate", "ser")
    trials: int = 100_000
    seed: int = 0
    pair: int = 0
    output: str = "out.csv"

    def __post_init__(self):
        if not self.snr_db or not self.bits or not self.d_variants:
            raise ScenarioError("sweep axes snr_db / bits / d must be nonempty")
        if len(self.alpha) != self.K * self.K:
            raise ScenarioError(f"alpha must have K*K={self.K * self.K} entries")
        for dv in self.d_variants:
            if len(dv) != self.K:
                raise ScenarioError("each d variant needs one entry per pair")
        if not 0 <= self.pair < self.K:
            raise ScenarioError(f"pair index {self.pair} outside [0, {self.K})")
        bad = [m for m in self.metrics if m not in ("outage", "rate", "ser")]
        if bad:
            raise ScenarioError(f"unknown metrics {bad}; use outage/rate/ser")
        if self.p_dbm_or_linear not in ("linear", "dbm"):
            raise ScenarioError("p_dbm_or_linear must be 'linear' or 'dbm'")
        if self.trials < 1:
            raise ScenarioError("trials must be positive")
        # gamma_th_db convertible to linear (always finite here)
        if not math.isfinite(self.gamma_th_db):
            raise ScenarioError("gamma_th_db must be finite")

    @property
    def gamma_th(self) -> float:
        return 10.0 ** (self.gamma_th_db / 10.0)

    def system(self, d: tuple[int, ...], snr_db: float) -> SystemConfig:
        rows = tuple(
            tuple(self.alpha[r * self.K + c] for c in range(self.K))
            for r in range(self.K)
        )
        return SystemConfig(
            K=self.K, nt=self.nt, nr=self.nr, d=d, alpha=rows,
            p=self.sigma2 * 10.0 ** (snr_db / 10.0), sigma2=self.sigma2,
        )

    def feedback(self, bits: float) -> FeedbackConfig:
        return FeedbackConfig.uniform(self.K, bits)

    def to_dict(self) -> dict:
        d_field = [list(dv) for dv in self.d_variants]
        return {
            "K": self.K,
            "nt": self.nt,
            "nr": self.nr,
            "d": d_field[0] if len(d_field) == 1 else d_field,
            "alpha": list(self.alpha),
            "p_dbm_or_linear": self.p_dbm_or_linear,
            "sigma2": self.sigma2,
            "snr_db": list(self.snr_db),
            "bits": ["inf" if b == math.inf else int(b) for b in self.bits],
            "gamma_th_db": self.gamma_th_db,
            "modulation": {"family": self.modulation.family, "order": self.modulation.order},
            "metrics": list(self.metrics),
            "trials": self.trials,
            "seed": self.seed,
            "pair": self.pair,
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        required = ("K", "nt", "nr", "d", "alpha", "snr_db", "bits")
        for key in required:
            if key not in raw:
                raise ScenarioError(f"missing required field {key!r}")
        known = {
            "K", "nt", "nr", "d", "alpha", "p_dbm_or_linear", "sigma2",
            "snr_db", "bits", "gamma_th_db", "modulation", "metrics",
            "trials", "seed", "pair", "output",
        }
        unknown = set(raw) - known
        if unknown:
            raise ScenarioError(f"unknown fields {sorted(unknown)}")
        d_raw = raw["d"]
        if d_raw and isinstance(d_raw[0], list):
            d_variants = tuple(tuple(int(x) for x in dv) for dv in d_raw)
        else:
            d_variants = (tuple(int(x) for x in d_raw),)

        def parse_bits(b):
            if b == "inf" or b == math.inf:
                return math.inf
            return float(b)

        mod_raw = raw.get("modulation", {"family": "psk", "order": 8})
        try:
            modulation = Modulation(mod_raw["family"], int(mod_raw["order"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad modulation field: {exc}") from exc
        try:
            return cls(
                K=int(raw["K"]),
                nt=int(raw["nt"]),
                nr=int(raw["nr"]),
                d_variants=d_variants,
                alpha=tuple(float(a) for a in raw["alpha"]),
                p_dbm_or_linear=raw.get("p_dbm_or_linear", "linear"),
                sigma2=float(raw.get("sigma2", 1.0)),
                snr_db=tuple(float(s) for s in raw["snr_db"]),
                bits=tuple(parse_bits(b) for b in raw["bits"]),
                gamma_th_db=float(raw.get("gamma_th_db", 0.0)),
                modulation=modulation,
                metrics=tuple(raw.get("metrics", ["outage", "rate", "ser"])),
                trials=int(raw.get("trials", 100_000)),
                seed=int(raw.get("seed", 0)),
                pair=int(raw.get("pair", 0)),
                output=str(raw.get("output", "out.csv")),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(str(exc)) from exc


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return Scenario.from_dict(raw)


def save_scenario(sc: Scenario, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(sc.to_dict(), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# runners: each returns (fieldnames, rows); rows are dicts

def _fmt_d(d: tuple[int, ...]) -> str:
    return ";".join(str(x) for x in d)


def _fmt_bits(b: float) -> str:
    return "inf" if b == math.inf else str(int(b))


def _cells(sc: Scenario):
    for dv in sc.d_variants:
        for b in sc.bits:
            for snr in sc.snr_db:
                yield dv, b, snr


def run_analyze(sc: Scenario):
    """Closed-form metrics (plus perfect-CSI baselines, floors/ceilings
    and losses) at every sweep point."""
    fields = ["snr_db", "bits", "d"]
    if "outage" in sc.metrics:
        fields += ["outage", "outage_perfect", "outage_floor", "outage_loss"]
    if "rate" in sc.metrics:
        fields += ["rate", "rate_perfect", "rate_ceiling", "rate_loss", "rate_asymptote"]
    if "ser" in sc.metrics:
        fields += ["ser", "ser_perfect", "ser_loss"]
    rows = []
    k = sc.pair
    for dv, b, snr in _cells(sc):
        system = sc.system(dv, snr)
        fb = sc.feedback(b)
        row = {"snr_db": snr, "bits": _fmt_bits(b), "d": _fmt_d(dv)}
        if "outage" in sc.metrics:
            row["outage"] = an.outage_probability(system, fb, k, sc.gamma_th)
            row["outage_perfect"] = an.outage_perfect(system, k, sc.gamma_th)
            row["outage_floor"] = an.outage_floor(system, fb, k, sc.gamma_th)
            row["outage_loss"] = an.outage_loss(system, fb, k, sc.gamma_th)
        if "rate" in sc.metrics:
            row["rate"] = an.ergodic_rate(system, fb, k)
            row["rate_perfect"] = an.ergodic_rate_perfect(system, k)
            row["rate_ceiling"] = (
                math.nan if b == math.inf else an.rate_ceiling(system, fb, k)
            )
            row["rate_loss"] = an.rate_loss(system, fb, k)
            row["rate_asymptote"] = (
                math.nan if b == math.inf else an.rate_high_largeB(system, fb, k)
            )
        if "ser" in sc.metrics:
            row["ser"] = an.ser_average(system, fb, k, sc.modulation)
            row["ser_perfect"] = an.ser_perfect(system, k, sc.modulation)
            row["ser_loss"] = an.ser_loss(system, fb, k, sc.modulation)
        rows.append(row)
    return fields, rows


def _simulate_cells(sc: Scenario, mode: str, threads: int):
    """Yield (dv, b, snr, per-metric MetricEstimate dict) per sweep point;
    one SINR sample pass is shared by all metrics of a point."""
    k = sc.pair
    for dv, b, snr in _cells(sc):
        system = sc.system(dv, snr)
        fb = sc.feedback(b)
        gamma, bad = sim.simulate_sinr_samples(
            system, fb, k, 0, trials=sc.trials, seed=sc.seed,
            mode=mode, threads=threads,
        )
        n = gamma.size
        est = {}

        def pack(values):
            return sim.MetricEstimate(
                mean=float(np.mean(values)),
                stderr=float(np.std(values, ddof=1) / math.sqrt(n)),
                trials=n, nonconverged=bad,
            )

        if "outage" in sc.metrics:
            est["outage"] = pack((gamma <= sc.gamma_th).astype(float))
        if "rate" in sc.metrics:
            est["rate"] = pack(np.log2(1.0 + gamma))
        if "ser" in sc.metrics:
            est["ser"] = pack(sim.conditional_ser(gamma, sc.modulation))
        yield dv, b, snr, est, bad


def run_simulate(sc: Scenario, mode: str = sim.ERROR_MODEL, threads: int = 1):
    fields = ["snr_db", "bits", "d"]
    for m in sc.metrics:
        fields += [f"{m}_mc", f"{m}_stderr"]
    fields.append("nonconverged")
    rows, total_bad = [], 0
    for dv, b, snr, est, bad in _simulate_cells(sc, mode, threads):
        row = {"snr_db": snr, "bits": _fmt_bits(b), "d": _fmt_d(dv), "nonconverged": bad}
        for m, e in est.items():
            row[f"{m}_mc"] = e.mean
            row[f"{m}_stderr"] = e.stderr
        rows.append(row)
        total_bad += bad
    n_cells = max(1, len(rows))
    frac = total_bad / (n_cells * sc.trials)
    return fields, rows, frac


def run_compare(sc: Scenario, mode: str = sim.ERROR_MODEL, threads: int = 1):
    """Long-format paired table: one row per (sweep point, metric) with
    theory, MC mean/stderr, z-score and the 3-s.e. verdict."""
    fields = ["snr_db", "bits", "d", "metric", "theory", "mc_mean", "mc_stderr", "z", "pass"]
    rows, total_bad, all_pass = [], 0, True
    k = sc.pair
    for dv, b, snr, est, bad in _simulate_cells(sc, mode, threads):
        system = sc.system(dv, snr)
        fb = sc.feedback(b)
        theory = {}
        if "outage" in est:
            theory["outage"] = an.outage_probability(system, fb, k, sc.gamma_th)
        if "rate" in est:
            theory["rate"] = an.ergodic_rate(system, fb, k)
        if "ser" in est:
            theory["ser"] = an.ser_average(system, fb, k, sc.modulation)
        for m, e in est.items():
            if e.stderr > 0.0:
                z = (e.mean - theory[m]) / e.stderr
            else:
                z = 0.0 if e.mean == theory[m] else math.inf
            ok = abs(z) <= COMPARE_Z_GATE
            all_pass &= ok
            rows.append({
                "snr_db": snr, "bits": _fmt_bits(b), "d": _fmt_d(dv),
                "metric": m, "theory": theory[m], "mc_mean": e.mean,
                "mc_stderr": e.stderr, "z": z, "pass": int(ok),
            })
        total_bad += bad
    n_points = max(1, sum(1 for _ in _cells(sc)))
    frac = total_bad / (n_points * sc.trials)
    return fields, rows, all_pass, frac


def run_plan(sc: Scenario):
    """Feedback budget schedules B(SNR) for both constant-gap policies,
    anchored at the smallest finite budget of the scenario."""
    finite = [int(b) for b in sc.bits if b != math.inf]
    base_bits = min(finite) if finite else 4
    snr_lin = [10.0 ** (s / 10.0) for s in sc.snr_db]
    system = sc.system(sc.d_variants[0], sc.snr_db[0])
    fields = ["snr_db", "bits_constant_outage_gap", "bits_constant_rate_gap"]
    cols = {
        policy: an.feedback_budget(system, sc.pair, snr_lin, policy, base_bits=base_bits)
        for policy in an.PLANNER_POLICIES
    }
    rows = [
        {
            "snr_db": s,
            "bits_constant_outage_gap": cols["constant-outage-gap"][i],
            "bits_constant_rate_gap": cols["constant-rate-gap"][i],
        }
        for i, s in enumerate(sc.snr_db)
    ]
    return fields, rows


# ---------------------------------------------------------------------------
# output

def _fmt_value(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return f"{v:.9g}"
    return str(v)


def write_csv(path: str, fields, rows) -> None:
    lines = [",".join(fields)]
    for row in rows:
        lines.append(",".join(_fmt_value(row.get(f, "")) for f in fields))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_sidecar(path: str, sc: Scenario, subcommand: str, extra: dict | None = None) -> None:
    meta = {
        "artifact": "ialim",
        "version": __version__,
        "subcommand": subcommand,
        "seed": sc.seed,
        "config": sc.to_dict(),
    }
    if extra:
        meta.update(extra)
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# presets

def _snr_axis(lo=-10, hi=40, step=5):
    return tuple(float(s) for s in range(lo, hi + 1, step))


def build_preset(name: str) -> tuple[Scenario, str]:
    """Canned scenario + the runner kind it should use ('analyze' or
    'compare'). Comparison presets carry the metrics the corresponding
    figure plots both theoretically and by simulation."""
    common = dict(
        K=3, nt=4, nr=2, d_variants=((1, 1, 1),), alpha=_TABLE1_ALPHA,
        snr_db=_snr_axis(), gamma_th_db=0.0, trials=100_000, seed=0, pair=0,
    )
    if name == "fig2":
        sc = Scenario(**common, bits=(2.0, 6.0, 10.0, math.inf),
                      metrics=("outage",), output="fig2.csv")
        return sc, "compare"
    if name == "fig3":
        sc = Scenario(**common, bits=(2.0, 6.0, 10.0),
                      metrics=("outage",), output="fig3.csv")
        return sc, "analyze"
    if name == "fig4":
        sc = Scenario(**common, bits=(2.0, 6.0, 10.0, math.inf),
                      metrics=("rate",), output="fig4.csv")
        return sc, "compare"
    if name == "fig5":
        sc = Scenario(**common, bits=(2.0, 6.0, 10.0),
                      metrics=("rate",), output="fig5.csv")
        return sc, "analyze"
    if name == "fig6":
        over = dict(common, nt=6, nr=4, d_variants=((1, 1, 1), (2, 2, 2)))
        sc = Scenario(**over, bits=(6.0,), metrics=("rate",), output="fig6.csv")
        return sc, "analyze"
    if name == "fig7":
        sc = Scenario(**common, bits=(6.0,), metrics=("ser",),
                      modulation=Modulation("psk", 8), output="fig7.csv")
        return sc, "compare-modulations"
    if name == "fig8":
        sc = Scenario(**common, bits=(2.0, 6.0, 10.0), metrics=("ser",),
                      modulation=Modulation("qam", 8), output="fig8.csv")
        return sc, "analyze"
    if name == "fig9":
        sc = Scenario(
            **dict(common, snr_db=(60.0,)),
            bits=tuple(float(b) for b in range(30, 61, 5)),
            metrics=("rate",), output="fig9.csv",
        )
        return sc, "analyze"
    raise ScenarioError(f"unknown preset {name!r}; use fig2..fig9")


def _run_preset(sc: Scenario, kind: str, mode: str, threads: int):
    """Execute a preset scenario; returns (fields, rows, all_pass, bad_frac)."""
    if kind == "analyze":
        fields, rows = run_analyze(sc)
        return fields, rows, True, 0.0
    if kind == "compare":
        return run_compare(sc, mode, threads)
    if kind == "compare-modulations":
        all_rows, ok_all, frac_max = [], True, 0.0
        fields = None
        for fam in ("psk", "pam", "qam"):
            sub = dataclasses.replace(sc, modulation=Modulation(fam, 8))
            fields, rows, ok, frac = run_compare(sub, mode, threads)
            for r in rows:
                r["modulation"] = sub.modulation.label()
            all_rows += rows
            ok_all &= ok
            frac_max = max(frac_max, frac)
        return ["modulation"] + fields, all_rows, ok_all, frac_max
    raise ScenarioError(f"unknown preset kind {kind!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# entry point

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ialim",
        description="Closed-form and Monte Carlo performance of interference "
                    "alignment with quantized CSI.",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        if config_required:
            sp.add_argument("--config", required=True, help="scenario JSON path")
        sp.add_argument("--output", help="override output CSV path")
        sp.add_argument("--trials", type=int, help="override trial count")
        sp.add_argument("--seed", type=int, help="override RNG seed")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--mode", choices=(sim.ERROR_MODEL, sim.RVQ),
                        default=sim.ERROR_MODEL)

    for name in ("analyze", "simulate", "compare", "plan"):
        common(sub.add_parser(name))
    sp = sub.add_parser("preset")
    sp.add_argument("name", help="fig2..fig9")
    common(sp, config_required=False)
    return p


def _apply_overrides(sc: Scenario, args) -> Scenario:
    updates = {}
    if args.output is not None:
        updates["output"] = args.output
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["seed"] = args.seed
    return dataclasses.replace(sc, **updates) if updates else sc


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "preset":
            sc, kind = build_preset(args.name)
            sc = _apply_overrides(sc, args)
            fields, rows, all_pass, bad_frac = _run_preset(sc, kind, args.mode, args.threads)
            write_csv(sc.output, fields, rows)
            write_sidecar(sc.output, sc, f"preset {args.name}")
            save_scenario(sc, sc.output + ".scenario.json")
        else:
            sc = _apply_overrides(load_scenario(args.config), args)
            all_pass, bad_frac = True, 0.0
            if args.command == "analyze":
                fields, rows = run_analyze(sc)
            elif args.command == "simulate":
                fields, rows, bad_frac = run_simulate(sc, args.mode, args.threads)
            elif args.command == "compare":
                fields, rows, all_pass, bad_frac = run_compare(sc, args.mode, args.threads)
            else:
                fields, rows = run_plan(sc)
            write_csv(sc.output, fields, rows)
            write_sidecar(sc.output, sc, args.command)
    except (ScenarioError, InfeasibleConfigError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    if not all_pass:
        print("compare gate failed: some |z| exceed 3", file=_sys.stderr)
        return EXIT_GATE
    if bad_frac > NONCONVERGED_FRACTION:
        print(
            f"solver non-convergence fraction {bad_frac:.2e} exceeds "
            f"{NONCONVERGED_FRACTION:.0e}", file=_sys.stderr,
        )
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
