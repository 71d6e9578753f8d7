"""Command-line front end.

    multibarrier --config contract.toml --command price-digital [--verify] [--json]

Settings are resolved as defaults < config file < ``MULTIBARRIER_*``
environment variables < command-line flags. The README documents the
config schema and the ``schema_version`` of the JSON report.

Exit status: 0 when the contract is priced and every requested verification
passes, 1 when a verification fails or the contract is knocked out, 2 for
configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from multibarrier import constants as C
from multibarrier.analytic import (
    price_multi_period,
    price_one_period,
    price_two_period_nested,
)
from multibarrier.core_model import BarrierSchedule, BarrierSpec, MarketParams, concatenate_windows
from multibarrier.corridor import approx_floor_via_corridor
from multibarrier.mc_oracle import (
    McConfig,
    estimate_bd_price,
    estimate_coupon_functional,
    estimate_coupon_pmf,
)
from multibarrier.structure_floor import (
    IllConditionedError,
    MomentInconsistencyError,
    price_structure_floor,
)

COMMANDS = ("price-digital", "price-floor", "price-corridor", "verify")
Z_LIMIT = 3.0


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class PricingJob:
    command: str
    market: MarketParams
    barriers: BarrierSpec
    schedule: BarrierSchedule | None
    valuation_time: float = 0.0
    spot_at_t: float | None = None
    floor: float | None = None
    horizon: float | None = None
    n_coupons: int | None = None
    k_max: int = C.K_MAX
    quad_nodes: int = C.QUAD_NODES
    mc: McConfig = field(default_factory=McConfig)
    verify: bool = False

    @property
    def spot(self) -> float:
        return self.market.spot if self.spot_at_t is None else self.spot_at_t


# -- config -------------------------------------------------------------------


def _get(section: dict, key: str, where: str, kind=float, default: Any = ...):
    if key not in section:
        if default is ...:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    value = section[key]
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int and (isinstance(value, bool) or int(value) != value):
            raise TypeError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {value!r}") from None


def _section(doc: dict, name: str, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"[{name}]: missing section")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}]: expected a table")
    return sec


def _build(where: str, factory, *args):
    try:
        return factory(*args)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _schedule(sec: dict) -> BarrierSchedule:
    if "windows" in sec and ("tenors" in sec or "period" in sec):
        raise ConfigError("schedule: give either windows or tenors + period, not both")
    if "windows" in sec:
        raw = sec["windows"]
        if not isinstance(raw, list) or not all(isinstance(w, list) and len(w) == 2 for w in raw):
            raise ConfigError("schedule.windows: expected a list of [start, length] pairs")
        return _build("schedule.windows", BarrierSchedule, raw)
    if "tenors" in sec:
        tenors = sec["tenors"]
        if not isinstance(tenors, list):
            raise ConfigError("schedule.tenors: expected a list of dates")
        period = _get(sec, "period", "schedule")
        return _build("schedule", BarrierSchedule.from_tenors, tenors, period)
    if {"first", "period", "count"} <= sec.keys():
        return _build(
            "schedule",
            BarrierSchedule.coupon_strip,
            _get(sec, "first", "schedule"),
            _get(sec, "period", "schedule"),
            _get(sec, "count", "schedule", int),
        )
    raise ConfigError("schedule: need windows, tenors + period, or first + period + count")


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _env(name: str):
    return os.environ.get(C.ENV_PREFIX + name)


def _env_flag(name: str) -> bool:
    value = _env(name)
    return value is not None and value.strip().lower() in {"1", "true", "yes", "on"}


def _env_int(name: str) -> int | None:
    value = _env(name)
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{C.ENV_PREFIX}{name}: expected an integer, got {value!r}") from None


def build_job(doc: dict, args: argparse.Namespace) -> PricingJob:
    """Validate a parsed config plus overrides into a :class:`PricingJob`."""
    command = args.command or _env("COMMAND") or doc.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command: expected one of {', '.join(COMMANDS)}, got {command!r}")

    m = _section(doc, "market")
    market = _build(
        "market", MarketParams, _get(m, "spot", "market"), _get(m, "rate", "market"), _get(m, "vol", "market")
    )
    b = _section(doc, "barriers")
    barriers = _build("barriers", BarrierSpec, _get(b, "low", "barriers"), _get(b, "up", "barriers"))

    corridor = _section(doc, "corridor", required=command == "price-corridor")
    schedule = None
    if command != "price-corridor" or "schedule" in doc:
        schedule = _schedule(_section(doc, "schedule"))

    floor = None
    if command == "price-floor":
        floor = _get(_section(doc, "floor"), "F", "floor")
        if not floor > 0:
            raise ConfigError(f"floor.F: must be positive, got {floor}")
    horizon = n_coupons = None
    if command == "price-corridor":
        horizon = _get(corridor, "horizon", "corridor")
        n_coupons = _get(corridor, "n", "corridor", int)
        floor = _get(corridor, "F", "corridor")
        if not horizon > 0:
            raise ConfigError(f"corridor.horizon: must be positive, got {horizon}")
        if n_coupons < 1:
            raise ConfigError(f"corridor.n: must be >= 1, got {n_coupons}")
        if floor < 0:
            raise ConfigError(f"corridor.F: must be >= 0, got {floor}")

    num = _section(doc, "numerics", required=False)
    mc = _section(doc, "monte_carlo", required=False)

    def knob(flag, env_name, section, where, key, default):
        if flag is not None:
            return flag
        env_value = _env_int(env_name)
        if env_value is not None:
            return env_value
        return _get(section, key, where, int, default)

    k_max = knob(args.kmax, "KMAX", num, "numerics", "k_max", C.K_MAX)
    quad_nodes = knob(args.nodes, "NODES", num, "numerics", "quad_nodes", C.QUAD_NODES)
    n_paths = knob(args.paths, "PATHS", mc, "monte_carlo", "n_paths", C.N_PATHS)
    seed = knob(args.seed, "SEED", mc, "monte_carlo", "seed", C.SEED)
    if k_max < 1:
        raise ConfigError(f"numerics.k_max: must be >= 1, got {k_max}")
    if quad_nodes < 8:
        raise ConfigError(f"numerics.quad_nodes: must be >= 8, got {quad_nodes}")
    mc_config = _build(
        "monte_carlo",
        McConfig,
        n_paths,
        _get(mc, "steps_per_window", "monte_carlo", int, C.STEPS_PER_WINDOW),
        seed,
        _get(mc, "antithetic", "monte_carlo", bool, False),
        _get(mc, "richardson_levels", "monte_carlo", int, 3),
    )

    t = _get(doc, "valuation_time", "valuation_time", float, 0.0)
    spot_at_t = _get(doc, "spot_at_t", "spot_at_t", float, None)
    if spot_at_t is not None and not spot_at_t > 0:
        raise ConfigError(f"spot_at_t: must be positive, got {spot_at_t}")
    if schedule is not None and not 0 <= t <= schedule.end:
        raise ConfigError(f"valuation_time: must lie in [0, {schedule.end}], got {t}")
    verify = bool(args.verify or _env_flag("VERIFY"))
    return PricingJob(
        command, market, barriers, schedule, t, spot_at_t, floor, horizon, n_coupons,
        k_max, quad_nodes, mc_config, verify,
    )


# -- commands -----------------------------------------------------------------


def _z(a: float, b: float, se: float) -> float:
    if se > 0:
        return (a - b) / se
    return 0.0 if abs(a - b) <= 1e-12 else math.inf


def _check(name: str, passed: bool, **detail) -> dict:
    return {"name": name, "passed": bool(passed), **detail}


def _mc_dict(est) -> dict:
    return {
        "mean": est.mean,
        "std_error": est.std_error,
        "n_paths": est.n_paths,
        "bias_note": est.bias_note,
    }


def _digital(job: PricingJob) -> dict:
    res = price_multi_period(
        job.market, job.barriers, job.schedule, job.valuation_time, job.spot, job.k_max, job.quad_nodes
    )
    report = {
        "price": res.price,
        "status": res.status,
        "truncation_bound": res.truncation_bound,
        "quadrature_error": res.quadrature_error,
        "k_used": res.k_used,
        "discount_factor": math.exp(-job.market.rate * (job.schedule.end - job.valuation_time)),
    }
    if job.verify and res.status == "priced":
        report["checks"] = [_mc_check(job, res.price)]
    return report


def _mc_check(job: PricingJob, price: float) -> dict:
    if job.valuation_time > job.schedule.start or job.spot_at_t not in (None, job.market.spot):
        return _check("mc_cross_check", True, skipped="valuation inside a window or spot override")
    est = estimate_bd_price(job.market, job.barriers, job.schedule, job.valuation_time, job.mc)
    z = _z(price, est.mean, est.std_error)
    return _check("mc_cross_check", abs(z) < Z_LIMIT, z=z, mc=_mc_dict(est))


def _floor(job: PricingJob) -> dict:
    res = price_structure_floor(
        job.market, job.barriers, job.schedule, job.floor, job.valuation_time,
        job.k_max, job.quad_nodes, job.spot_at_t,
    )
    report = {
        "price": res.price,
        "status": res.status,
        "truncation_bound": res.truncation_bound,
        "quadrature_error": res.quadrature_error,
        "discount_factor": res.discount,
        "pmf": [float(p) for p in res.pmf.probs],
        "pmf_residual": res.pmf.residual,
        "condition_estimate": res.pmf.condition_estimate,
        "moments": [float(m) for m in res.moments.moments],
    }
    if job.verify:
        n = len(job.schedule)
        mc_pmf = estimate_coupon_pmf(job.market, job.barriers, job.schedule, job.mc, job.valuation_time)
        z_bins = [_z(a, b, s) for a, b, s in zip(res.pmf.probs, mc_pmf.probs, mc_pmf.std_errors)]
        floor_mc = estimate_coupon_functional(
            job.market, job.barriers, job.schedule,
            lambda a: np.maximum(job.floor - a, 0.0), job.mc, job.valuation_time,
        )
        z_floor = _z(res.price, res.discount * floor_mc.mean, res.discount * floor_mc.std_error)
        report["mc_pmf"] = [float(p) for p in mc_pmf.probs]
        report["mc_pmf_std_errors"] = [float(s) for s in mc_pmf.std_errors]
        report["pmf_z_scores"] = z_bins
        report["checks"] = [
            _check("pmf_vs_mc", all(abs(z) < Z_LIMIT for z in z_bins), max_abs_z=max(abs(z) for z in z_bins)),
            _check("floor_vs_mc", abs(z_floor) < Z_LIMIT, z=z_floor),
            _check("pmf_sums_to_one", abs(sum(res.pmf.probs) - 1.0) < 1e-9, n=n),
        ]
    return report


def _corridor(job: PricingJob) -> dict:
    est = approx_floor_via_corridor(job.market, job.barriers, job.horizon, job.n_coupons, job.floor, job.mc)
    report = {"price": est.mean, "status": "priced", "mc": _mc_dict(est)}
    if job.verify:
        schedule = BarrierSchedule.coupon_strip(0.0, job.horizon / job.n_coupons, job.n_coupons)
        exact = price_structure_floor(
            job.market, job.barriers, schedule, job.floor, 0.0, job.k_max, job.quad_nodes
        ).price if job.floor > 0 else 0.0
        report["exact_floor_price"] = exact
        report["checks"] = [
            _check("payoff_bounds", 0.0 <= est.mean <= math.exp(-job.market.rate * job.horizon) * job.floor + 1e-12),
        ]
    return report


def _verify(job: PricingJob) -> dict:
    """Oracle-equivalence suite on the configured contract."""
    m, b, s, t, spot = job.market, job.barriers, job.schedule, job.valuation_time, job.spot
    res = price_multi_period(m, b, s, t, spot, job.k_max, job.quad_nodes)
    checks = []
    disc = math.exp(-m.rate * (s.end - t))
    checks.append(_check("discount_bounds", -1e-15 <= res.price <= disc + 1e-12, price=res.price, discount=disc))

    merged = concatenate_windows(s)
    res_c = price_multi_period(m, b, merged, t, spot, job.k_max, job.quad_nodes)
    checks.append(_check("concatenation_invariance", abs(res.price - res_c.price) <= 1e-10,
                         diff=abs(res.price - res_c.price)))

    res_2k = price_multi_period(m, b, s, t, spot, 2 * job.k_max, job.quad_nodes)
    diff_k = abs(res.price - res_2k.price)
    checks.append(_check("truncation_convergence", diff_k <= res.truncation_bound + res.quadrature_error + 1e-13,
                         diff=diff_k, bound=res.truncation_bound))

    if len(merged) == 1 and t < merged.start:
        (t0, p_len), = merged.windows
        one = price_one_period(m, b, t0, p_len, t, spot, job.k_max, job.quad_nodes)
        checks.append(_check("one_period_reduction", abs(one.price - res.price) <= 1e-10,
                             diff=abs(one.price - res.price)))
    if len(merged) == 2 and t < merged.start:
        nested = price_two_period_nested(m, b, merged, t, spot)
        checks.append(_check("nested_oracle", abs(nested.price - res.price) <= 1e-6,
                             diff=abs(nested.price - res.price)))
    if res.status == "priced":
        checks.append(_mc_check(job, res.price))
    return {
        "price": res.price,
        "status": res.status,
        "truncation_bound": res.truncation_bound,
        "quadrature_error": res.quadrature_error,
        "checks": checks,
    }


_HANDLERS = {
    "price-digital": _digital,
    "price-floor": _floor,
    "price-corridor": _corridor,
    "verify": _verify,
}


def run(job: PricingJob) -> dict:
    """Dispatch a validated job and return the report document."""
    body = _HANDLERS[job.command](job)
    checks = body.get("checks", [])
    ok = body["status"] == "priced" and all(c["passed"] for c in checks)
    return {
        "schema_version": C.SCHEMA_VERSION,
        "command": job.command,
        "ok": ok,
        "inputs": {
            "spot": job.market.spot,
            "rate": job.market.rate,
            "vol": job.market.vol,
            "b_low": job.barriers.b_low,
            "b_up": job.barriers.b_up,
            "windows": [list(w) for w in job.schedule.windows] if job.schedule else None,
            "valuation_time": job.valuation_time,
            "spot_at_t": job.spot,
            "floor": job.floor,
            "horizon": job.horizon,
            "n_coupons": job.n_coupons,
            "k_max": job.k_max,
            "quad_nodes": job.quad_nodes,
            "n_paths": job.mc.n_paths,
            "steps_per_window": job.mc.steps_per_window,
            "seed": job.mc.seed,
        },
        **body,
    }


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def to_json(report: dict) -> str:
    return json.dumps(_finite(report), indent=2, sort_keys=True)


def to_text(report: dict) -> str:
    lines = [f"{report['command']}  status={report['status']}  ok={report['ok']}"]
    lines.append(f"  price             {report['price']:.12g}")
    for key in ("truncation_bound", "quadrature_error", "discount_factor", "exact_floor_price"):
        if key in report:
            lines.append(f"  {key:<17} {report[key]:.6g}")
    if "mc" in report:
        lines.append(f"  mc std_error      {report['mc']['std_error']:.6g}")
    if "pmf" in report:
        lines.append("  i   P[A=i] analytic" + ("   P[A=i] mc      z" if "mc_pmf" in report else ""))
        for i, p in enumerate(report["pmf"]):
            row = f"  {i:<3} {p:<18.10f}"
            if "mc_pmf" in report:
                row += f" {report['mc_pmf'][i]:<14.6f} {report['pmf_z_scores'][i]:+.2f}"
            lines.append(row)
    for check in report.get("checks", []):
        mark = "PASS" if check["passed"] else "FAIL"
        extra = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in check.items() if k not in {"name", "passed", "mc"})
        lines.append(f"  [{mark}] {check['name']}" + (f"  ({extra})" if extra else ""))
    return "\n".join(lines)


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multibarrier", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="TOML contract file (env MULTIBARRIER_CONFIG)")
    p.add_argument("--command", choices=COMMANDS, help="overrides the config's command")
    p.add_argument("--verify", action="store_true", help="add Monte Carlo / oracle cross-checks")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.add_argument("--seed", type=int, help=f"Monte Carlo seed (default {C.SEED})")
    p.add_argument("--paths", type=int, help=f"Monte Carlo paths (default {C.N_PATHS})")
    p.add_argument("--kmax", type=int, help=f"sine-series cap (default {C.K_MAX})")
    p.add_argument("--nodes", type=int, help=f"Gauss-Legendre nodes (default {C.QUAD_NODES})")
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    as_json = args.json or _env_flag("JSON")
    path = args.config or _env("CONFIG")
    try:
        if not path:
            raise ConfigError("--config: no config file given")
        job = build_job(load_config(path), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(job)
    except (MomentInconsistencyError, IllConditionedError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    print(to_json(report) if as_json else to_text(report))
    return 0 if report["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
