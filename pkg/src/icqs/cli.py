"""Command-line front door: generate, classify, solve, benchmark, replicate.

Every command is deterministic given its flags and seed.  Exit codes:
0 success, 2 argument or file parse error, 3 solver error, 4 replication
check failed.  Tables are comma-separated UTF-8 with LF line endings and a
header row.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import bounds, dynamics, finite, game, instgen, iqp
from .errors import IcqsError

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SOLVER = 3
EXIT_REPLICATION = 4


@dataclass
class RunRecord:
    """One row of the benchmark/result table."""

    instance: str
    n_players: int
    t_br: float  # wall seconds around the solve pipeline only
    k_br: int
    outcome: str
    max_gain: float | None
    max_delta_a_priori: float | None


def _parse_start(text: str, inst: game.IcqsInstance) -> list[np.ndarray]:
    # one comma list per player, players separated by semicolons
    try:
        parts = [p for p in text.split(";") if p.strip()]
        vectors = [np.array([float(v) for v in part.split(",")]) for part in parts]
    except ValueError as exc:
        raise IcqsError(f"cannot parse start {text!r}: {exc}") from exc
    if len(vectors) != inst.k:
        raise IcqsError(f"start has {len(vectors)} players, instance has {inst.k}")
    return vectors


def solve_pipeline(
    inst: game.IcqsInstance,
    start=None,
    max_iters: int = dynamics.DEFAULT_MAX_ITERS,
    mode: str = dynamics.INTEGER,
) -> dict:
    """Classify, iterate, restrict, solve the finite game, verify deltas.

    Returns a plain-dict report mirroring the instance file format; the
    equilibrium stage is skipped for divergent or capped runs.
    """
    t0 = time.perf_counter()
    report = game.classify(inst)
    trace = dynamics.run_br(inst, start=start, max_iters=max_iters, mode=mode)
    result: dict = {
        "classification": report.classification.value,
        "rho": report.rho,
        "sigma_max": list(report.sigma_max),
        "sigma_min": list(report.sigma_min),
        "outcome": trace.outcome,
        "iterations": trace.iterations,
        "termination_radius": dynamics.termination_radius(inst, report),
        "divergence_radius": dynamics.divergence_radius(inst, report),
        "mode": mode,
    }
    equilibrium = None
    if trace.outcome in (dynamics.OUTCOME_CYCLE, dynamics.OUTCOME_FIXED_POINT):
        sets = dynamics.cycle_sets(trace)
        if mode == dynamics.INTEGER:
            fg = finite.restrict(inst, sets)
            profile, achieved_eps = finite.solve_equilibrium(fg)
            delta = finite.verify_delta(inst, fg, profile)
            pack = bounds.guarantee_pack(inst, sets, report)
            equilibrium = {
                "strategies": [
                    [np.asarray(s).tolist() for s in player] for player in fg.strategies
                ],
                "probabilities": [p.tolist() for p in profile.probs],
                "within_game_eps": achieved_eps,
                "expected_costs": list(delta.expected_costs),
                "deviation_costs": list(delta.deviation_costs),
                "deviation_gains": list(delta.gains),
                "cycle_diameters": list(pack.l_measured),
                "l_bound": {
                    "flatness": _maybe_list(pack.l_bound_flatness),
                    "exact": _maybe_list(pack.l_bound_exact),
                },
                "delta_a_posteriori": {
                    "flatness": list(pack.delta_posteriori_flatness),
                    "exact": list(pack.delta_posteriori_exact),
                },
                "delta_a_priori": {
                    "flatness": _maybe_list(pack.delta_priori_flatness),
                    "exact": _maybe_list(pack.delta_priori_exact),
                },
                "flatness_l_violated": list(pack.flatness_l_violated),
                "delta_bounded": _delta_bounded(delta, pack),
            }
        else:
            fixed = [np.asarray(x).tolist() for x in trace.profiles[-1]]
            equilibrium = {"fixed_point": fixed}
    result["equilibrium"] = equilibrium
    result["t_br"] = time.perf_counter() - t0
    result["trace"] = trace
    return result


def _maybe_list(values):
    if values is None:
        return None
    return [None if math.isinf(v) else v for v in values]


def _delta_bounded(delta: finite.DeltaReport, pack: bounds.GuaranteePack) -> bool | None:
    # gains within the a-priori bound (exact-prox variant); None when no bound
    if pack.delta_priori_exact is None:
        return None
    return bool(
        all(g <= b + 1e-9 for g, b in zip(delta.gains, pack.delta_priori_exact))
    )


def record_from_result(name: str, inst: game.IcqsInstance, result: dict) -> RunRecord:
    eq = result.get("equilibrium") or {}
    gains = eq.get("deviation_gains")
    dpe = (eq.get("delta_a_priori") or {}).get("exact")
    return RunRecord(
        instance=name,
        n_players=inst.k,
        t_br=result["t_br"],
        k_br=result["iterations"],
        outcome=result["outcome"],
        max_gain=max(gains) if gains else None,
        max_delta_a_priori=max(v for v in dpe) if dpe and None not in dpe else None,
    )


def _load(path: str) -> game.IcqsInstance:
    try:
        return game.load_instance(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise SystemExit(_fail(f"cannot read instance {path}: {exc}", EXIT_PARSE))


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_classify(args) -> int:
    inst = _load(args.instance)
    report = game.classify(inst)
    print(f"classification: {report.classification.value}")
    print(f"rho: {report.rho if report.rho is not None else ''}")
    for i in range(inst.k):
        print(
            f"player {i}: sigma_max={report.sigma_max[i]:.12g} sigma_min={report.sigma_min[i]:.12g}"
        )
    return EXIT_OK


def _apply_flatness_flags(args) -> None:
    if getattr(args, "flatness_coeff", None) is not None or getattr(
        args, "flatness_exponent", None
    ) is not None:
        iqp.set_flatness_rule(
            args.flatness_coeff if args.flatness_coeff is not None else iqp.FLATNESS_COEFF,
            args.flatness_exponent
            if args.flatness_exponent is not None
            else iqp.FLATNESS_EXPONENT,
        )


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    _apply_flatness_flags(args)
    start = _parse_start(args.start, inst) if args.start else None
    try:
        result = solve_pipeline(inst, start=start, max_iters=args.max_iters, mode=args.mode)
    except IcqsError as exc:
        return _fail(str(exc), EXIT_SOLVER)
    trace = result.pop("trace")
    record = record_from_result(Path(args.instance).stem, inst, result)
    out_dir = Path(args.out) if args.out else Path(args.instance).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.instance).stem
    report_path = out_dir / f"{stem}.report.json"
    trace_path = out_dir / f"{stem}.trace.csv"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=1, sort_keys=True)
        fh.write("\n")
    dynamics.export_trace(trace, trace_path)
    print(f"outcome: {result['outcome']} after {result['iterations']} iterations")
    eq = result.get("equilibrium") or {}
    if "deviation_gains" in eq:
        print(f"max deviation gain: {max(eq['deviation_gains']):.6g}")
        if eq["delta_bounded"] is False:
            print("WARNING: gains exceed the a-priori delta bound")
        elif eq["delta_bounded"] is None:
            print("NOT delta-bounded: no a-priori bound applies "
                  "(instance is not positively adequate)")
    print(f"report: {report_path}")
    print(f"trace: {trace_path}")
    return EXIT_OK


def _gen_from_entry(entry: dict, index: int) -> tuple[str, game.IcqsInstance]:
    family = entry.get("family")
    seed = int(entry.get("seed", index))
    if family == "pricing":
        spec = instgen.PricingSpec(n_players=int(entry["n_players"]), seed=seed)
        name = f"pricing-{spec.n_players}p-s{seed}"
        return name, instgen.gen_pricing(spec)
    if family == "random":
        spec = instgen.RandomSpec(
            n_players=int(entry["n_players"]),
            vars_per_player=int(entry.get("vars_per_player", 5)),
            seed=seed,
        )
        name = f"random-{spec.n_players}p-{spec.vars_per_player}v-s{seed}"
        return name, instgen.gen_random(spec)
    if family == "negative":
        spec = instgen.NegativeSpec(
            n_players=int(entry.get("n_players", 2)),
            vars_per_player=int(entry.get("vars_per_player", 2)),
            seed=seed,
        )
        name = f"negative-{spec.n_players}p-{spec.vars_per_player}v-s{seed}"
        return name, instgen.gen_negative(spec)
    if family == "builtin":
        name = entry["name"]
        return f"builtin-{name}", instgen.builtin(name, M=entry.get("M"))
    raise IcqsError(f"unknown family {family!r}")


def cmd_bench(args) -> int:
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"cannot read bench spec {args.spec}: {exc}", EXIT_PARSE)
    _apply_flatness_flags(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs: list[tuple[str, dict]] = []
    for entry in spec.get("families", []):
        count = int(entry.get("count", 1))
        base_seed = int(entry.get("seed", 0))
        for r in range(count):
            jobs.append((f"{len(jobs):04d}", {**entry, "seed": base_seed + r}))

    records: list[RunRecord] = []
    for index, (job_id, entry) in enumerate(jobs):
        try:
            name, inst = _gen_from_entry(entry, index)
            result = solve_pipeline(inst, max_iters=args.max_iters)
            result.pop("trace")
            records.append(record_from_result(f"{job_id}-{name}", inst, result))
        except IcqsError as exc:
            records.append(
                RunRecord(
                    instance=f"{job_id}-failed",
                    n_players=int(entry.get("n_players", 0)),
                    t_br=float("nan"),
                    k_br=0,
                    outcome=f"error:{type(exc).__name__}",
                    max_gain=None,
                    max_delta_a_priori=None,
                )
            )
    records.sort(key=lambda r: r.instance)

    results_path = out_dir / "results.csv"
    with open(results_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("instance,n_players,t_br,k_br,outcome,max_gain,max_delta_a_priori\n")
        for rec in records:
            row = asdict(rec)
            fh.write(
                "{instance},{n_players},{t_br!r},{k_br},{outcome},{max_gain},{max_delta_a_priori}\n".format(
                    **{k: ("" if v is None else v) for k, v in row.items()}
                )
            )

    # cumulative solved-within-time curve over the solved instances
    times = sorted(r.t_br for r in records if not math.isnan(r.t_br))
    profile_path = out_dir / "profile.csv"
    with open(profile_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time,fraction\n")
        n = len(records)
        for idx, t in enumerate(times, start=1):
            fh.write(f"{t!r},{idx / n!r}\n")
    print(f"results: {results_path}")
    print(f"profile: {profile_path}")
    return EXIT_OK


def _check(checks: list[tuple[str, bool, str]], label: str, ok: bool, detail: str = "") -> None:
    checks.append((label, ok, detail))


def replicate_checks(name: str, M: int) -> list[tuple[str, bool, str]]:
    """Scripted scenario checks for the built-in instances."""
    checks: list[tuple[str, bool, str]] = []
    if name == "example1":
        inst = instgen.builtin("example1")
        report = game.classify(inst)
        _check(checks, "classified negatively adequate",
               report.classification is game.Adequacy.NEGATIVE, str(report.classification))
        trace = dynamics.run_br(inst, start=[[5.0], [5.0]], max_iters=8)
        doubling = all(
            float(trace.profiles[t][i][0]) == 5.0 * 2.0**t
            for t in range(len(trace.profiles))
            for i in range(2)
        )
        _check(checks, "iterates double each sweep", doubling,
               f"profiles={[tuple(float(x[0]) for x in p) for p in trace.profiles]}")
        _check(checks, "divergence certified",
               trace.outcome == dynamics.OUTCOME_DIVERGENCE, trace.outcome)
    elif name == "cycling":
        inst = instgen.builtin("cycling")
        trace = dynamics.run_br(inst, start=[[0.0], [0.0]])
        path = [tuple(float(x[0]) for x in p) for p in trace.profiles]
        _check(checks, "period-4 cycle from the origin",
               trace.outcome == dynamics.OUTCOME_CYCLE
               and path == [(0, 0), (0, 1), (1, 1), (1, 0), (0, 0)], str(path))
        fg = finite.restrict(inst, dynamics.cycle_sets(trace))
        profile = finite.mne_two_player(fg)
        half = all(np.allclose(p, [0.5, 0.5], atol=1e-9) for p in profile.probs)
        _check(checks, "mixed equilibrium is half-half", half,
               str([p.tolist() for p in profile.probs]))
        delta = finite.verify_delta(inst, fg, profile)
        _check(checks, "no profitable lattice deviation",
               delta.max_gain <= 1e-9, f"max gain {delta.max_gain:.3e}")
    elif name == "counterexample":
        inst = instgen.builtin("counterexample", M=M)
        start = [[0.0, 1.0], [0.0, 1.0]]
        trace = dynamics.run_br(inst, start=start)
        sets = dynamics.cycle_sets(trace)
        expected = {(0.0, 1.0), (float(M), 0.0)}
        got = {tuple(map(float, s)) for s in sets.strategies[0]}
        got |= {tuple(map(float, s)) for s in sets.strategies[1]}
        _check(checks, "cycle between (0,1) and (M,0)", got == expected, str(got))
        fg = finite.restrict(inst, sets)
        _check(checks, "restricted game has no pure equilibrium",
               finite.pne_search(fg) == [], "")
        profile = finite.mne_two_player(fg)
        delta = finite.verify_delta(inst, fg, profile)
        target = M * M / 8.0
        _check(checks, f"x-player gains at least M^2/8 = {target}",
               delta.gains[0] >= target - 1e-6, f"measured gain {delta.gains[0]:.6g}")
    else:
        raise IcqsError(f"unknown replication scenario {name!r}")
    return checks


def cmd_replicate(args) -> int:
    try:
        checks = replicate_checks(args.name, args.M)
    except IcqsError as exc:
        return _fail(str(exc), EXIT_PARSE)
    failed = 0
    for label, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail and not ok else ""
        print(f"{status}: {label}{suffix}")
        if not ok:
            failed += 1
    return EXIT_OK if failed == 0 else EXIT_REPLICATION


def cmd_generate(args) -> int:
    try:
        entry = {
            "family": args.family,
            "n_players": args.players,
            "vars_per_player": args.vars,
            "seed": args.seed,
            "name": args.name,
            "M": args.M,
        }
        _, inst = _gen_from_entry(entry, 0)
    except IcqsError as exc:
        return _fail(str(exc), EXIT_PARSE)
    game.save_instance(inst, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icqs",
        description="Best-response solver for integer convex quadratic games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="print the adequacy classification")
    p.add_argument("instance")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("solve", help="run the full solve pipeline on an instance file")
    p.add_argument("instance")
    p.add_argument("--start", default=None,
                   help="per-player comma lists separated by semicolons, e.g. '0,1;0,1'")
    p.add_argument("--max-iters", type=int, default=dynamics.DEFAULT_MAX_ITERS)
    p.add_argument("--mode", choices=[dynamics.INTEGER, dynamics.CONTINUOUS],
                   default=dynamics.INTEGER)
    p.add_argument("--out", default=None, help="directory for report and trace files")
    p.add_argument("--flatness-coeff", type=float, default=None,
                   help="override the flatness rule coefficient (default 1.0)")
    p.add_argument("--flatness-exponent", type=float, default=None,
                   help="override the flatness rule exponent (default 2.5)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="generate a seeded batch and solve every instance")
    p.add_argument("spec", help="JSON batch description")
    p.add_argument("--out", required=True)
    p.add_argument("--max-iters", type=int, default=dynamics.DEFAULT_MAX_ITERS)
    p.add_argument("--flatness-coeff", type=float, default=None,
                   help="override the flatness rule coefficient (default 1.0)")
    p.add_argument("--flatness-exponent", type=float, default=None,
                   help="override the flatness rule exponent (default 2.5)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replicate", help="run the scripted checks for a built-in scenario")
    p.add_argument("name", choices=list(instgen.BUILTIN_NAMES))
    p.add_argument("--M", type=int, default=10)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("generate", help="write a generated instance to a file")
    p.add_argument("--family", required=True,
                   choices=["pricing", "random", "negative", "builtin"])
    p.add_argument("--players", type=int, default=2)
    p.add_argument("--vars", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default=None, help="builtin name when --family builtin")
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IcqsError as exc:
        return _fail(str(exc), EXIT_SOLVER)


if __name__ == "__main__":
    raise SystemExit(main())
