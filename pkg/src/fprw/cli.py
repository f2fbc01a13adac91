"""Command-line interface: analyze | series | phase | simulate | selftest.

Input is a JSON description of the free product (factors, weights, options);
outputs are JSON or CSV with floats printed to 12 significant digits and
infinities rendered as the string "inf".  Exit codes: 2 for configuration
errors, 3 for numeric failures, 4 when phase analysis is asked for a product
with more than two factors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import classify, mc, phase
from .errors import ConfigError, DegenerateProduct, FprwError
from .factors import ExplicitSeries, FiniteGroup, HomTree, LatticeNN, cyclic_group
from .product import (
    FreeProductSpec,
    analyze_product,
    factor_analytics,
    product_green_series,
    product_radius,
)

_DEFAULTS = {"order": 512, "grid": 512, "steps": 100, "walks": 10_000, "seed": 0}


# ---------------------------------------------------------------------------
# config parsing


def _reject_unknown(obj: dict, allowed, where: str):
    extra = set(obj) - set(allowed)
    if extra:
        raise ConfigError(f"unknown field(s) {sorted(extra)} in {where}")


def _parse_number(value, where: str) -> float:
    if value == "inf":
        return math.inf
    if isinstance(value, (int, float)):
        return float(value)
    raise ConfigError(f"{where} must be a number or \"inf\"")


def parse_factor(obj: dict, idx: int):
    where = f"factors[{idx}]"
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigError(f"{where} must be an object with a 'type' field")
    kind = obj["type"]
    if kind == "lattice":
        _reject_unknown(obj, {"type", "dim", "beta", "p"}, where)
        if "dim" in obj:
            if "beta" in obj or "p" in obj:
                raise ConfigError(f"{where}: give either dim or beta/p, not both")
            return LatticeNN.simple(int(obj["dim"]))
        return LatticeNN(beta=tuple(obj["beta"]), p=tuple(obj["p"]))
    if kind == "cyclic":
        _reject_unknown(obj, {"type", "n", "mu"}, where)
        return cyclic_group(int(obj["n"]), tuple(obj["mu"]))
    if kind == "finite":
        _reject_unknown(obj, {"type", "P", "id", "table"}, where)
        return FiniteGroup(
            P=tuple(tuple(r) for r in obj["P"]),
            id=int(obj["id"]),
            table=tuple(tuple(r) for r in obj["table"]),
        )
    if kind == "tree":
        _reject_unknown(obj, {"type", "q"}, where)
        return HomTree(q=int(obj["q"]))
    if kind == "explicit":
        _reject_unknown(
            obj,
            {"type", "coeffs", "radius", "g_at_r", "gprime_at_r", "sing", "period"},
            where,
        )
        sing = obj.get("sing")
        return ExplicitSeries(
            coeffs=tuple(obj["coeffs"]),
            radius=float(obj["radius"]),
            g_at_r=_parse_number(obj["g_at_r"], f"{where}.g_at_r"),
            gprime_at_r=_parse_number(obj["gprime_at_r"], f"{where}.gprime_at_r"),
            sing=None if sing is None else (float(sing[0]), int(sing[1])),
            period=int(obj["period"]),
        )
    raise ConfigError(f"{where}: unknown factor type {kind!r}")


def load_config(path: str):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(raw, {"factors", "weights", "options"}, "config")
    factors = raw.get("factors")
    weights = raw.get("weights")
    if not isinstance(factors, list) or not isinstance(weights, list):
        raise ConfigError("config needs 'factors' and 'weights' lists")
    specs = tuple(parse_factor(f, i) for i, f in enumerate(factors))
    wsum = sum(float(w) for w in weights)
    if not (wsum > 0 and math.isfinite(wsum)):
        raise ConfigError("weights must have a positive finite sum")
    if abs(wsum - 1.0) > 1e-9:
        print(f"warning: weights sum to {wsum:g}; normalizing", file=sys.stderr)
    options = dict(_DEFAULTS)
    user_opts = raw.get("options", {})
    _reject_unknown(user_opts, set(_DEFAULTS), "options")
    options.update({k: int(v) for k, v in user_opts.items()})
    return FreeProductSpec(specs, tuple(float(w) for w in weights)), options


# ---------------------------------------------------------------------------
# presentation


def _present(value):
    """12-significant-digit floats; infinities as the string 'inf'."""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(f"{value:.12g}")
    if isinstance(value, dict):
        return {k: _present(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_present(v) for v in value]
    return value


def _fmt(value) -> str:
    if isinstance(value, float):
        return "inf" if math.isinf(value) else f"{value:.12g}"
    return str(value)


def _write(text: str, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _factor_report(spec, an):
    sing = None
    if an.sing is not None:
        sing = {"q": an.sing.q, "k": an.sing.k, "lambda": an.sing.lam, "kappa": an.sing.kappa}
    return {
        "type": type(spec).__name__,
        "radius": an.radius,
        "g_at_radius": an.g_at_r,
        "gprime_at_radius": an.gprime_at_r,
        "theta": an.theta,
        "period": an.period,
        "psi_at_radius": an.psi_at_radius,
        "singularity": sing,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(spec: FreeProductSpec, options, args) -> str:
    ans = factor_analytics(spec)
    pa = analyze_product(spec)
    warnings = []
    if pa.degenerate:
        law = classify.classify_multi(spec)
        warnings.append("degenerate recurrent product (Z/2Z)*(Z/2Z)")
    else:
        law = classify.classify_multi(spec)
        if law.confidence == classify.NEAR_CRITICAL:
            warnings.append(
                "Psi(theta-bar) inside the near-critical band; the law is "
                "discontinuous nearby and float noise may flip the branch"
            )
    report = {
        "factors": [_factor_report(f, an) for f, an in zip(spec.factors, ans)],
        "weights": list(spec.weights),
        "theta_bar": pa.theta_bar,
        "argmin_set": list(pa.argmin_set),
        "psi_bar": pa.psi_bar,
        "radius": pa.radius,
        "spectral_radius": 1.0 / pa.radius,
        "g_at_radius": pa.g_at_radius,
        "period": pa.period,
        "degenerate": pa.degenerate,
        "law": {
            "kind": law.kind,
            "factor_index": law.factor_index,
            "lambda": law.lam,
            "kappa": law.kappa,
            "label": law.law_string(),
            "confidence": law.confidence,
        },
        "sqrt_coefficient": None if pa.sqrt_coeff is None else list(pa.sqrt_coeff),
        "warnings": warnings,
    }
    return json.dumps(_present(report), indent=2) + "\n"


def cmd_series(spec: FreeProductSpec, options, args) -> str:
    order = args.order or options["order"]
    g = product_green_series(spec, order)
    radius, _ = product_radius(spec)
    delta = classify.period(spec)
    if args.format == "json":
        payload = {
            "radius": radius,
            "period": delta,
            "coefficients": list(g.coeffs),
        }
        return json.dumps(_present(payload), indent=2) + "\n"
    lines = [f"# radius={_fmt(radius)} period={delta}", "n,mu_n,mu_n_radius_n"]
    for n in range(order + 1):
        scaled = g[n] * radius**n
        lines.append(f"{n},{_fmt(g[n])},{_fmt(scaled)}")
    return "\n".join(lines) + "\n"


def cmd_phase(spec: FreeProductSpec, options, args) -> str:
    if spec.m != 2:
        raise _PhaseArity("phase analysis is defined for two factors only")
    grid = args.grid or options["grid"]
    diag = phase.sweep(spec, grid_size=grid)
    if args.format == "json":
        payload = {
            "alpha_c": diag.alpha_c,
            "alpha_low": diag.alpha_low,
            "alpha_high": diag.alpha_high,
            "case": diag.case,
            "grid": [
                {
                    "alpha1": p.alpha1,
                    "upsilon": p.upsilon,
                    "kind": p.kind,
                    "factor_index": p.factor_index,
                    "lambda": p.lam,
                    "kappa": p.kappa,
                    "near_critical": p.near_critical,
                }
                for p in diag.grid
            ],
        }
        return json.dumps(_present(payload), indent=2) + "\n"
    lines = [
        f"# case={diag.case} alpha_c={_fmt(diag.alpha_c) if diag.alpha_c is not None else 'none'}"
        f" alpha_low={_fmt(diag.alpha_low) if diag.alpha_low is not None else 'none'}"
        f" alpha_high={_fmt(diag.alpha_high) if diag.alpha_high is not None else 'none'}",
        "alpha1,upsilon,law,near_critical",
    ]
    for p in diag.grid:
        label = f"n^-{p.lam:g}" if p.kappa == 0 else f"n^-{p.lam:g}*log^{p.kappa}(n)"
        lines.append(f"{_fmt(p.alpha1)},{_fmt(p.upsilon)},{label},{int(p.near_critical)}")
    return "\n".join(lines) + "\n"


class _PhaseArity(FprwError):
    pass


def cmd_simulate(spec: FreeProductSpec, options, args) -> str:
    steps = args.steps if args.steps is not None else options["steps"]
    walks = args.walks if args.walks is not None else options["walks"]
    seed = args.seed if args.seed is not None else options["seed"]
    result = mc.simulate(spec, steps=steps, walks=walks, seed=seed)
    exact_order = min(steps, 14)
    exact = mc.bfs_convolution(spec, exact_order) if steps > 0 else None
    freq = result.frequencies()
    rows = []
    for n in range(1, steps + 1):
        row = {"n": n, "empirical": float(freq[n])}
        if exact is not None and n <= exact_order:
            p = exact[n]
            sigma = math.sqrt(max(p * (1.0 - p), 1e-300) / walks)
            row["exact"] = p
            row["z"] = (float(freq[n]) - p) / sigma if sigma > 0 else 0.0
        else:
            row["exact"] = None
            row["z"] = None
        rows.append(row)
    if args.format == "json":
        payload = {"steps": steps, "walks": walks, "seed": seed, "profile": rows}
        return json.dumps(_present(payload), indent=2) + "\n"
    lines = [f"# walks={walks} seed={seed}", "n,empirical,exact,z"]
    for row in rows:
        exact_s = _fmt(row["exact"]) if row["exact"] is not None else ""
        z_s = _fmt(row["z"]) if row["z"] is not None else ""
        lines.append(f"{row['n']},{_fmt(row['empirical'])},{exact_s},{z_s}")
    return "\n".join(lines) + "\n"


def cmd_selftest(args) -> int:
    from . import selftest

    wanted = None
    if args.criteria:
        wanted = sorted({int(c) for c in args.criteria.split(",")})
    results = selftest.run(wanted)
    for r in results:
        print(selftest.format_line(r))
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fprw",
        description="random-walk asymptotics on free products of groups",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON product description")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("analyze", help="classify the return-probability law")
    common(p)
    p = sub.add_parser("series", help="exact return-probability series")
    common(p)
    p.add_argument("--order", type=int, default=None)
    p.set_defaults(format="csv")
    p = sub.add_parser("phase", help="phase diagram in the first weight")
    common(p)
    p.add_argument("--grid", type=int, default=None)
    p = sub.add_parser("simulate", help="seeded Monte Carlo return profile")
    common(p)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--walks", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(format="csv")
    p = sub.add_parser("selftest", help="run the acceptance criteria")
    p.add_argument("--criteria", default=None, help="comma-separated subset, e.g. 1,2,9")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args)
    try:
        spec, options = load_config(args.config)
        if args.command == "analyze":
            text = cmd_analyze(spec, options, args)
        elif args.command == "series":
            text = cmd_series(spec, options, args)
        elif args.command == "phase":
            text = cmd_phase(spec, options, args)
        elif args.command == "simulate":
            text = cmd_simulate(spec, options, args)
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _PhaseArity as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (FprwError, DegenerateProduct) as exc:
        print(f"numeric failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    _write(text, args.out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
