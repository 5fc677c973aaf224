"""Batch command-line front end.

Subcommands:
  solve    optimal placement for one (N, K, M, popularity) instance
  sweep    rate and bound curves over a cache-size grid (CSV)
  subpkt   subpacketization of the optimal placement over a grid (CSV)
  verify   LP certification + Monte Carlo + bit-exact decode checks

Exit codes: 0 success, 2 configuration error, 3 oracle guard violation,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import popularity
from .bounds import bound_exhaustive, bound_proposed, bound_two_group
from .delivery import (
    minimal_file_size,
    monte_carlo_rate,
    random_library,
    realize,
    sample_demands,
    serve,
)
from .delivery import decode as delivery_decode
from .errors import (
    CodedCacheError,
    DecodeError,
    InstanceTooLargeError,
    InvalidParameterError,
)
from .lp_oracle import OPT_TOL, ORACLE_GUARD_VARS, certify
from .placement import (
    PlacementMatrix,
    average_rate,
    rate_coefficients,
    subpacketization,
    worst_case_subpacketization_bound,
)
from .popularity import order_stats
from .solver import algorithm1, algorithm4, one_group_placement

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_VERIFY = 4

SWEEP_HEADER = (
    "M,optimal_rate,one_group_rate,alg1_rate,lb_two_group_prior,lb_exhaustive_prior,lb_proposed"
)
SUBPKT_HEADER = "M,L_max,L_avg,worst_case_bound"


def _fraction(text: str) -> float:
    return float(Fraction(text))


def _parse_grid(text: str) -> list[float]:
    """Inclusive lo:hi:step grid."""
    try:
        lo, hi, step = (float(Fraction(part)) for part in text.split(":"))
    except ValueError as exc:
        raise InvalidParameterError(f"bad grid {text!r}, expected lo:hi:step") from exc
    if step <= 0 or hi < lo:
        raise InvalidParameterError(f"bad grid {text!r}: need step > 0 and hi >= lo")
    count = int(round((hi - lo) / step))
    grid = [lo + i * step for i in range(count + 1)]
    return [m for m in grid if m <= hi + 1e-9]


def _parse_step_levels(text: str) -> list[tuple[str, int]]:
    """Step popularity such as '5/9x1,1/30x10,1/90x10'."""
    levels = []
    for chunk in text.split(","):
        prob, _, count = chunk.partition("x")
        if not count:
            raise InvalidParameterError(f"bad step level {chunk!r}, expected PROBxCOUNT")
        levels.append((prob.strip(), int(count)))
    return levels


def _popularity_spec(args, config: dict) -> dict:
    """Resolve the popularity source from flags, falling back to the config."""
    sources = [args.zipf is not None, args.probs is not None, args.step is not None]
    if sum(sources) > 1:
        raise InvalidParameterError("give only one of --zipf / --probs / --step")
    if args.zipf is not None:
        return {"type": "zipf", "theta": args.zipf}
    if args.probs is not None:
        return {"type": "custom", "probs": [p.strip() for p in args.probs.split(",")]}
    if args.step is not None:
        return {
            "type": "step",
            "levels": [{"p": p, "count": c} for p, c in _parse_step_levels(args.step)],
        }
    if "popularity" in config:
        return config["popularity"]
    raise InvalidParameterError("no popularity given (use --zipf, --probs, --step, or a config)")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise InvalidParameterError("config file must hold a JSON object")
    return data


def _merged(args, config: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def _build_model(args, config: dict) -> popularity.PopularityModel:
    n = _merged(args, config, "N")
    spec = _popularity_spec(args, config)
    return popularity.from_spec(spec, int(n) if n is not None else None)


def _out_paths(out: str | None) -> tuple[Path | None, Path | None]:
    """--out stem -> (json path, csv path); explicit suffix selects one."""
    if out is None:
        return None, None
    path = Path(out)
    if path.suffix == ".json":
        return path, None
    if path.suffix == ".csv":
        return None, path
    return path.with_suffix(".json"), path.with_suffix(".csv")


def _solution_json(candidate, model) -> str:
    payload = candidate.to_json_dict()
    if list(model.perm) != list(range(model.n_files)):
        payload["input_permutation"] = list(model.perm)
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def cmd_solve(args) -> int:
    config = _load_config(args.config)
    model = _build_model(args, config)
    k = int(_merged(args, config, "K"))
    m = _merged(args, config, "M")
    if m is None:
        raise InvalidParameterError("solve needs --M")
    candidate = algorithm4(model, k, float(m), prune_equal_popularity=args.prune)
    candidate.placement.check_valid(float(m))

    json_text = _solution_json(candidate, model)
    csv_text = candidate.placement.to_csv()
    json_path, csv_path = _out_paths(_merged(args, config, "out"))
    fmt = _merged(args, config, "format", "json")
    if json_path or csv_path:
        if json_path:
            json_path.write_text(json_text)
        if csv_path:
            csv_path.write_text(csv_text)
    else:
        sys.stdout.write(csv_text if fmt == "csv" else json_text)

    tuple_txt = ", ".join(
        f"{name}={value}"
        for name, value in (("n_o", candidate.n_o), ("n_1", candidate.n_1),
                            ("l_o", candidate.l_o), ("l_1", candidate.l_1))
        if value is not None
    )
    print(
        f"case={candidate.case_id.value} groups={candidate.groups} "
        f"rate={candidate.rate:.10g} ({tuple_txt})",
        file=sys.stderr,
    )
    return EXIT_OK


def _sweep_row(payload) -> str:
    n, k, m, spec = payload
    model = popularity.from_spec(spec, n)
    coeffs = rate_coefficients(model, order_stats(model, k))
    optimal = algorithm4(model, k, m, coeffs=coeffs)
    baseline = average_rate(one_group_placement(n, k, m), coeffs)
    zero_tail = algorithm1(model, k, m, coeffs=coeffs)
    two_group = bound_two_group(model, k, m)
    exhaustive = bound_exhaustive(model, k, m)
    proposed = bound_proposed(model, k, m, optimal.first_group_size)
    cells = (
        m, optimal.rate, baseline, zero_tail.rate,
        two_group.value, exhaustive.value, proposed.value,
    )
    return ",".join(f"{v:.10g}" for v in cells)


def _grid_from(args, config) -> list[float]:
    grid_text = _merged(args, config, "M_grid")
    if grid_text is not None:
        return _parse_grid(grid_text)
    m = _merged(args, config, "M")
    if m is None:
        raise InvalidParameterError("need --M or --M-grid")
    return [float(m)]


def _emit_csv(header: str, rows: list[str], out: str | None) -> None:
    text = "\n".join([header, *rows]) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    model = _build_model(args, config)
    k = int(_merged(args, config, "K"))
    spec = _popularity_spec(args, config)
    grid = _grid_from(args, config)
    payloads = [(model.n_files, k, m, spec) for m in grid]
    jobs = int(_merged(args, config, "jobs", 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, payloads))
    else:
        rows = [_sweep_row(p) for p in payloads]
    _emit_csv(SWEEP_HEADER, rows, _merged(args, config, "out"))
    return EXIT_OK


def cmd_subpkt(args) -> int:
    config = _load_config(args.config)
    model = _build_model(args, config)
    k = int(_merged(args, config, "K"))
    coeffs = rate_coefficients(model, order_stats(model, k))
    bound, _ = worst_case_subpacketization_bound(k)
    rows = []
    for m in _grid_from(args, config):
        candidate = algorithm4(model, k, m, coeffs=coeffs)
        report = subpacketization(candidate.placement)
        rows.append(f"{m:.10g},{report.max_level},{report.avg_level:.10g},{bound}")
    _emit_csv(SUBPKT_HEADER, rows, _merged(args, config, "out"))
    return EXIT_OK


def _verify_instance(model, k: int, m: float, trials: int, seed: int, demands: int) -> list[tuple[str, bool, str]]:
    """certify + Monte Carlo + bit-exact decode; returns (name, ok, detail) rows."""
    checks = []
    report = certify(model, k, m)
    s = report.structural
    checks.append(("lp_gap", abs(report.gap) <= OPT_TOL, f"|gap|={abs(report.gap):.3e}"))
    checks.append(("file_groups<=3", s.alg_groups <= 3, f"groups={s.alg_groups}"))
    checks.append(
        ("row_nonzeros<=2", s.alg_max_nonzeros_per_row <= 2, f"max={s.alg_max_nonzeros_per_row}")
    )
    checks.append(
        ("cache_equality", abs(s.alg_cache_residual) <= 1e-9, f"residual={s.alg_cache_residual:.3e}")
    )
    checks.append(
        ("popularity_first", report.candidate.placement.is_popularity_first(), "")
    )
    checks.append(("subpacketization_bound", s.alg_subpacketization_ok, ""))
    checks.append(("lp_nonnegativity", s.lp_min_entry >= -1e-8, f"min={s.lp_min_entry:.3e}"))

    mc = monte_carlo_rate(report.candidate.placement, model, trials, seed)
    margin = 5.0 * mc.std_error + 1e-9 * k
    checks.append(
        (
            "monte_carlo",
            abs(mc.mean_rate - report.alg_rate) <= margin,
            f"mc={mc.mean_rate:.6g} analytic={report.alg_rate:.6g} stderr={mc.std_error:.2g}",
        )
    )

    f_bits = minimal_file_size(report.candidate.placement)
    library = random_library(model.n_files, f_bits, seed)
    realization = realize(report.candidate.placement, library)
    decoded = True
    try:
        for row in sample_demands(model, k, demands, seed + 1):
            transcript = serve(realization, row)
            for user in range(1, k + 1):
                delivery_decode(realization, transcript, user)
    except DecodeError as exc:
        decoded = False
        checks.append(("bit_exact_decode", False, str(exc)))
    if decoded:
        checks.append(("bit_exact_decode", True, f"{demands} demands, F={f_bits} bits"))
    return checks


def _check_placement_file(args, config) -> int:
    data = json.loads(Path(args.placement).read_text())
    matrix = PlacementMatrix.from_json_dict(data)
    m = _merged(args, config, "M")
    problems = matrix.violations(float(m) if m is not None else None)
    if problems:
        for problem in problems:
            print(f"FAIL placement_invariants {problem}")
        return EXIT_VERIFY
    print("PASS placement_invariants")
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _load_config(args.config)
    if args.placement is not None:
        return _check_placement_file(args, config)

    seed = int(_merged(args, config, "seed", 20240))
    trials = int(_merged(args, config, "trials", 20000))
    batch = _merged(args, config, "batch")
    instances = []
    if batch is None:
        model = _build_model(args, config)
        k = int(_merged(args, config, "K"))
        m = _merged(args, config, "M")
        if m is None:
            raise InvalidParameterError("verify needs --M (or --batch / --placement)")
        if model.n_files * (k + 1) > ORACLE_GUARD_VARS:
            raise InstanceTooLargeError(
                f"{model.n_files * (k + 1)} variables exceed the oracle guard"
            )
        instances.append((model, k, float(m)))
    else:
        rng = np.random.default_rng(seed)
        for _ in range(int(batch)):
            n = int(rng.integers(2, 7))
            k = int(rng.integers(1, 6))
            weights = np.sort(rng.random(n))[::-1] + 0.05
            model = popularity.make_custom(list(weights / weights.sum()))
            m = float(rng.choice(np.arange(0.5, n + 0.001, 0.5)))
            instances.append((model, k, m))

    failures = 0
    for index, (model, k, m) in enumerate(instances):
        label = f"[{index}] N={model.n_files} K={k} M={m:g}"
        checks = _verify_instance(
            model, k, m, trials=trials, seed=seed + index, demands=args.demands
        )
        for name, ok, detail in checks:
            if not ok or batch is None:
                print(f"{'PASS' if ok else 'FAIL'} {label} {name} {detail}".rstrip())
            failures += 0 if ok else 1
        if batch is not None and all(ok for _, ok, _ in checks):
            print(f"PASS {label}")
    print(f"verify: {len(instances)} instance(s), {failures} failed check(s)")
    return EXIT_OK if failures == 0 else EXIT_VERIFY


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--N", type=int, help="number of files")
    parser.add_argument("--K", type=int, help="number of users")
    parser.add_argument("--M", type=_fraction, help="cache size per user (real, may be a fraction)")
    parser.add_argument("--M-grid", dest="M_grid", help="cache grid lo:hi:step")
    parser.add_argument("--zipf", type=float, help="Zipf exponent theta")
    parser.add_argument("--probs", help="comma-separated popularity values (fractions allowed)")
    parser.add_argument("--step", help="step popularity PROBxCOUNT[,PROBxCOUNT...]")
    parser.add_argument("--config", help="JSON config file (same keys as the flags)")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials")
    parser.add_argument("--out", help="output path (stem or .json/.csv)")
    parser.add_argument("--format", dest="format", choices=("json", "csv"), help="stdout format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codedcache",
        description="Optimal cache placement for coded caching under nonuniform popularity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="optimal placement for one instance")
    _add_common(p_solve)
    p_solve.add_argument(
        "--prune", action="store_true",
        help="skip group borders between equal-popularity files",
    )
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="rate and bound curves over a cache grid")
    _add_common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, help="parallel worker processes (default 1)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_subpkt = sub.add_parser("subpkt", help="subpacketization over a cache grid")
    _add_common(p_subpkt)
    p_subpkt.set_defaults(func=cmd_subpkt)

    p_verify = sub.add_parser("verify", help="certification and simulation checks")
    _add_common(p_verify)
    p_verify.add_argument("--batch", type=int, help="number of seeded random instances")
    p_verify.add_argument("--demands", type=int, default=20, help="decode-test demands per instance")
    p_verify.add_argument("--placement", help="check a placement JSON file against the invariants")
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InstanceTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (CodedCacheError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
