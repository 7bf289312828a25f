"""Command-line front end.

Subcommands::

    profile    build speed functions over an (x, y) grid
    partition  row distribution for an n x n matrix from speed functions
    pad-plan   per-group padded FFT lengths for that distribution
    run        transform a matrix with one pipeline variant and report timing
    compare    time two variants over a range of n and report speedups

Exit status is 0 on success, 1 on internal errors (including a failed
``--check``) and 2 on user or domain errors. ``--config FILE`` reads
``key=value`` defaults for any flag; flags given on the command line win.
``FPMFFT_MODEL`` and ``FPMFFT_BACKEND`` override the default model path and
FFT backend.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .benchmark import (
    GroupConfig,
    SweepSpec,
    SyntheticClock,
    build_speed_functions,
    light_policy,
    mean_using_ttest,
    parse_range,
    policy_for_problem_size,
)
from .engine import (
    BatchPlan,
    SignalMatrix,
    Variant,
    dft2d_naive,
    dft2d_padded_reference,
    execute,
    fpm_plan,
    get_backend,
    lb_plan,
    load_matrix,
    load_matrix_text,
    save_matrix,
    save_matrix_text,
    sequential_plan,
)
from .fpm_model import (
    DomainError,
    ModelFormatError,
    ModelNotFoundError,
    load_speed_functions,
    variation_percent,
    work_flops,
)
from .padding import OBJECTIVES
from .partitioner import DEFAULT_EPSILON
from .pipeline import plan_fpm

log = logging.getLogger("fpmfft")

EXIT_OK, EXIT_INTERNAL, EXIT_USER = 0, 1, 2
COMPARE_COLUMNS = ["n", "time_base", "time_cand", "speedup", "mflops_base", "mflops_cand"]
VARIANTS = [v.value for v in Variant]


class UserError(Exception):
    pass


# --- shared helpers -------------------------------------------------------


def _backend_name(args):
    return args.backend or os.environ.get("FPMFFT_BACKEND", "scipy")


def _model_paths(args):
    paths = list(args.model or [])
    if not paths and os.environ.get("FPMFFT_MODEL"):
        paths = os.environ["FPMFFT_MODEL"].split(os.pathsep)
    return paths


def _load_models(args, required=True):
    paths = _model_paths(args)
    if not paths:
        if required:
            raise UserError("a speed-function model is required (--model or FPMFFT_MODEL)")
        return []
    functions = []
    for path in paths:
        try:
            loaded = load_speed_functions(path)
        except FileNotFoundError:
            raise UserError(f"model file not found: {path}") from None
        except ModelFormatError as exc:
            raise UserError(f"{path}: {exc}") from None
        functions.extend(loaded)
    ids = [sf.processor_id for sf in functions]
    if len(set(ids)) != len(ids):
        raise UserError(f"duplicate processor ids across model files: {ids}")
    return sorted(functions, key=lambda sf: sf.processor_id)


def _emit(args, human_lines, records):
    if args.json:
        for rec in records:
            print(json.dumps(rec, sort_keys=True))
        return
    for line in human_lines:
        print(line)
    for rec in records:
        print("record: " + json.dumps(rec, sort_keys=True))


def _synthetic_speed(group_id, x, y, seed=0):
    """Deterministic made-up speed surface with periodic dips, for dry runs."""
    speed = 1e9 * (1.0 + 0.15 * (group_id - 1))
    if (7 * x + 13 * y + seed) % 5 == 0:
        speed *= 0.5
    return speed


# --- profile -----------------------------------------------------------------


def cmd_profile(args):
    xs, ys = parse_range(args.x), parse_range(args.y)
    try:
        sweep = SweepSpec(xs, ys, memory_budget_bytes=args.memory_budget)
    except ValueError as exc:
        raise UserError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    groups = [GroupConfig(g, args.t) for g in range(1, args.p + 1)]
    csv_paths = {g.group_id: str(out / f"group_{g.group_id}.csv") for g in groups}
    if not args.resume:
        for path in csv_paths.values():
            if os.path.exists(path):
                os.remove(path)

    if args.policy == "light":
        policy = light_policy()
    else:
        policy = policy_for_problem_size

    if args.synthetic:
        clock = SyntheticClock()
        timer = clock

        def factory(group, x, y):
            dt = work_flops(x, y) / _synthetic_speed(group.group_id, x, y, args.seed)
            return lambda: clock.advance(dt)
    else:
        timer = time.perf_counter
        backend = get_backend(_backend_name(args))
        rng = np.random.default_rng(args.seed)

        def factory(group, x, y):
            pristine = (rng.uniform(-1, 1, x * y) + 1j * rng.uniform(-1, 1, x * y)).astype(np.complex128)
            work = pristine.copy()

            def run():
                # refresh the input so repeated forward transforms cannot overflow
                np.copyto(work, pristine)
                BatchPlan(backend, y, x, 1, y, group.workers).execute(work)
            return run

    outcome = build_speed_functions(sweep, groups, factory, timer=timer, policy=policy,
                                    csv_paths=csv_paths, log_path=str(out / "sweep_log.csv"),
                                    resume=args.resume)
    lines = [f"wrote {path} ({len(sf)} points)" for sf, path in zip(outcome.functions, csv_paths.values())]
    if outcome.skipped:
        lines.append(f"skipped {len(outcome.skipped)} points over the memory budget")
    if outcome.missing:
        lines.append(f"{len(outcome.missing)} measurements failed; see sweep_log.csv")
    records = [{"group_id": sf.processor_id, "path": csv_paths[sf.processor_id], "points": len(sf)}
               for sf in outcome.functions]
    _emit(args, lines, records)
    return EXIT_OK


# --- partition / pad-plan --------------------------------------------------


def _partition_from_args(args, pad):
    functions = _load_models(args)
    try:
        fp = plan_fpm(functions, args.n, 1, args.epsilon, pad=pad, objective=getattr(args, "objective", "time"),
                      strict_positive=args.strict_positive)
    except (DomainError, ModelNotFoundError) as exc:
        raise UserError(str(exc)) from None
    return functions, fp


def cmd_partition(args):
    _, fp = _partition_from_args(args, pad=False)
    d = fp.distribution
    rec = d.as_record()
    lines = [
        f"n={args.n} p={d.p} path={d.path}",
        f"distribution d={list(d.counts)} (sum {sum(d.counts)})",
        f"predicted time {d.objective_time_s:.6g} s",
    ]
    _emit(args, lines, [rec])
    return EXIT_OK


def cmd_pad_plan(args):
    _, fp = _partition_from_args(args, pad=True)
    d = fp.distribution
    lines = [f"n={args.n} p={d.p} path={d.path} d={list(d.counts)}"]
    records = []
    for dec in fp.pads:
        lines.append(
            f"group {dec.group_id}: rows={dec.rows_x} length {dec.base_length_n} -> {dec.padded_length}"
            f" (gain {dec.predicted_gain_s:.6g}){' ' + dec.note if dec.note else ''}"
        )
        records.append(dec.as_record())
    _emit(args, lines, records)
    return EXIT_OK


# --- run -----------------------------------------------------------------------


@dataclass
class RunConfig:
    n: int
    variant: Variant = Variant.SEQUENTIAL
    groups_p: int | None = None
    workers_t: int = 1
    model_paths: list = field(default_factory=list)
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    block_size: int = 64
    backend: str = "scipy"
    objective: str = "time"
    exact: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise UserError("n must be >= 1")
        if self.variant in (Variant.FPM, Variant.FPM_PAD) and not self.model_paths:
            raise UserError(f"variant {self.variant.value} requires --model")
        hw = os.cpu_count() or 1
        if (self.groups_p or 1) * self.workers_t > hw:
            log.warning("p*t = %d exceeds %d available CPUs", (self.groups_p or 1) * self.workers_t, hw)


def _run_config(args, variant=None):
    return RunConfig(
        n=args.n,
        variant=Variant(variant or args.variant),
        groups_p=args.p,
        workers_t=args.t,
        model_paths=_model_paths(args),
        epsilon=args.epsilon,
        seed=args.seed,
        block_size=args.block_size,
        backend=_backend_name(args),
        objective=getattr(args, "objective", "time"),
        exact=getattr(args, "exact", False),
    )


@dataclass
class Prepared:
    plan: object
    distribution: object = None
    pads: list = field(default_factory=list)


def _prepare(cfg: RunConfig, functions, n=None):
    n = cfg.n if n is None else n
    if cfg.variant is Variant.SEQUENTIAL:
        return Prepared(sequential_plan(n, cfg.workers_t))
    if cfg.variant is Variant.LB:
        return Prepared(lb_plan(n, cfg.groups_p or 2, cfg.workers_t))
    if cfg.groups_p is not None and cfg.groups_p != len(functions):
        raise UserError(f"--p {cfg.groups_p} does not match {len(functions)} speed functions in the model")
    pad = cfg.variant is Variant.FPM_PAD and not cfg.exact
    try:
        fp = plan_fpm(functions, n, cfg.workers_t, cfg.epsilon, pad=pad, objective=cfg.objective)
    except (DomainError, ModelNotFoundError) as exc:
        raise UserError(str(exc)) from None
    plan = fp.plan
    if cfg.variant is Variant.FPM_PAD and not pad:
        plan = fpm_plan(fp.distribution, n, cfg.workers_t, [n] * len(functions))
    return Prepared(plan, fp.distribution, fp.pads)


def _load_input(path):
    if path.endswith(".txt"):
        return load_matrix_text(path)
    return load_matrix(path)


def cmd_run(args):
    cfg = _run_config(args)
    functions = _load_models(args) if cfg.variant in (Variant.FPM, Variant.FPM_PAD) else []
    if args.input:
        try:
            m = _load_input(args.input)
        except (OSError, ValueError) as exc:
            raise UserError(f"cannot read matrix {args.input}: {exc}") from None
        if m.n != cfg.n:
            raise UserError(f"--n {cfg.n} does not match input matrix of size {m.n}")
    else:
        m = SignalMatrix.random(cfg.n, cfg.seed)
    original = m.copy() if args.check else None
    prep = _prepare(cfg, functions)
    backend = get_backend(cfg.backend)

    t0 = time.perf_counter()
    execute(prep.plan, m, backend, block_size=cfg.block_size)
    elapsed = time.perf_counter() - t0

    rec = {
        "variant": cfg.variant.value,
        "n": cfg.n,
        "time_s": elapsed,
        "mflops": work_flops(cfg.n, cfg.n) / elapsed / 1e6 if cfg.n >= 2 and elapsed > 0 else None,
        "distribution": prep.plan.counts,
        "padded_lengths": prep.plan.padded_lengths,
    }
    if prep.distribution is not None:
        rec["path"] = prep.distribution.path
    status = EXIT_OK
    if args.check:
        if cfg.n > 256:
            reference = np.fft.fft2(original.view)
            label = "numpy fft2"
        elif cfg.variant is Variant.FPM_PAD:
            reference = dft2d_padded_reference(original, prep.plan.counts, prep.plan.padded_lengths).view
            label = "padded direct-sum reference"
        else:
            reference = dft2d_naive(original).view
            label = "naive DFT"
        err = float(np.sqrt(np.mean(np.abs(m.view - reference) ** 2)) / max(
            np.sqrt(np.mean(np.abs(reference) ** 2)), 1e-300))
        rec["check"] = {"reference": label, "rel_rms": err, "passed": err <= 1e-6}
        if err > 1e-6:
            status = EXIT_INTERNAL
    if args.output:
        (save_matrix_text if args.output.endswith(".txt") else save_matrix)(args.output, m)
        rec["output"] = args.output

    lines = [
        f"variant={rec['variant']} n={cfg.n} time={elapsed:.6g} s"
        + (f" ({rec['mflops']:.1f} MFLOPs)" if rec["mflops"] else ""),
        f"distribution d={rec['distribution']}",
    ]
    if cfg.variant is Variant.FPM_PAD:
        lines.append(f"padded lengths={rec['padded_lengths']}")
    if args.check:
        c = rec["check"]
        lines.append(f"check vs {c['reference']}: rel rms {c['rel_rms']:.3g} -> {'PASS' if c['passed'] else 'FAIL'}")
    _emit(args, lines, [rec])
    return status


# --- compare -------------------------------------------------------------------


def _time_variant(prep, n, backend, policy, inner, block_size, seed):
    pristine = SignalMatrix.random(n, seed)
    work = pristine.copy()

    def run():
        for _ in range(inner):
            np.copyto(work.data, pristine.data)
            execute(prep.plan, work, backend, block_size=block_size)

    res = mean_using_ttest(run, policy)
    return res.mean_s / inner


def _calibrate(prep, n, backend, block_size, min_sample_s, seed):
    m = SignalMatrix.random(n, seed)
    inner = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(inner):
            execute(prep.plan, m, backend, block_size=block_size)
        if time.perf_counter() - t0 >= min_sample_s or inner >= 1 << 16:
            return inner
        inner *= 2


def summarize_speedups(speedups):
    """Average and maximum speedup, computed in row order."""
    return {"avg_speedup": sum(speedups) / len(speedups), "max_speedup": max(speedups)}


def cmd_compare(args):
    ns = parse_range(args.n_range)
    if any(n < 2 for n in ns):
        raise UserError("compare needs n >= 2")
    if args.rounds < 1:
        raise UserError("--rounds must be >= 1")
    base_cfg = _run_config(argparse.Namespace(**{**vars(args), "n": ns[0]}), args.baseline)
    cand_cfg = _run_config(argparse.Namespace(**{**vars(args), "n": ns[0]}), args.candidate)
    needs_model = {Variant.FPM, Variant.FPM_PAD} & {base_cfg.variant, cand_cfg.variant}
    functions = _load_models(args) if needs_model else []
    policy = policy_for_problem_size if args.strict else (lambda n: light_policy())
    backend = get_backend(base_cfg.backend)
    sanity = args.baseline == args.candidate

    rows = []
    for n in ns:
        pb = _prepare(base_cfg, functions, n)
        pc = _prepare(cand_cfg, functions, n)
        inner = _calibrate(pb, n, backend, args.block_size, args.min_sample_s, args.seed)
        pol = policy(n)
        # alternate the two variants over rounds so slow drift hits both alike
        tbs, tcs = [], []
        for r in range(args.rounds):
            order = [(pb, tbs), (pc, tcs)] if r % 2 == 0 else [(pc, tcs), (pb, tbs)]
            for prep, acc in order:
                acc.append(_time_variant(prep, n, backend, pol, inner, args.block_size, args.seed))
        # a round's two timings share the machine's state; keep the round with the median ratio
        ratios = np.array(tbs) / np.array(tcs)
        k = int(np.argsort(ratios, kind="stable")[(len(ratios) - 1) // 2])
        tb, tc = tbs[k], tcs[k]
        work = work_flops(n, n)
        rows.append({"n": n, "time_base": tb, "time_cand": tc, "speedup": tb / tc,
                     "mflops_base": work / tb / 1e6, "mflops_cand": work / tc / 1e6})

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARE_COLUMNS)
        for r in rows:
            writer.writerow([r["n"]] + [repr(float(r[c])) for c in COMPARE_COLUMNS[1:]])

    plot_path = Path(args.plot_out) if args.plot_out else out.with_suffix(".plot.csv")
    with open(plot_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "mflops_base", "mflops_cand", "variation_base_pct", "variation_cand_pct"])
        prev = None
        for r in rows:
            vb = vc = ""
            if prev is not None:
                vb = repr(variation_percent(prev["mflops_base"], r["mflops_base"]))
                vc = repr(variation_percent(prev["mflops_cand"], r["mflops_cand"]))
            writer.writerow([r["n"], repr(r["mflops_base"]), repr(r["mflops_cand"]), vb, vc])
            prev = r

    # re-read so the summary is computed from exactly the values in the file
    with open(out, newline="", encoding="utf-8") as fh:
        speedups = [float(r["speedup"]) for r in csv.DictReader(fh)]
    summary = {"baseline": args.baseline, "candidate": args.candidate, "points": len(rows),
               "sanity_mode": sanity, "csv": str(out), "plot_csv": str(plot_path),
               **summarize_speedups(speedups)}
    summary_path = Path(args.summary_out) if args.summary_out else out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    summary["summary_json"] = str(summary_path)

    lines = [f"n={r['n']}: base {r['time_base']:.4g} s, cand {r['time_cand']:.4g} s, speedup {r['speedup']:.3f}"
             for r in rows]
    lines.append(f"average speedup {summary['avg_speedup']:.3f}, maximum {summary['max_speedup']:.3f}"
                 + (" (self-comparison sanity mode)" if sanity else ""))
    _emit(args, lines, [summary])
    return EXIT_OK


# --- argument parsing -------------------------------------------------------


def _add_model_args(p):
    p.add_argument("--model", action="append", help="speed-function CSV (repeatable)")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="homogeneity tolerance")
    p.add_argument("--strict-positive", action="store_true", help="require at least one row per group")


def _add_run_args(p):
    p.add_argument("--p", type=int, default=None, help="number of groups")
    p.add_argument("--t", type=int, default=1, help="workers per group")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--block-size", type=int, default=64)
    p.add_argument("--backend", choices=["scipy", "numpy"], default=None)
    p.add_argument("--objective", choices=OBJECTIVES, default="time")
    p.add_argument("--exact", action="store_true", help="disable padding in the padded variant")


def build_parser():
    parser = argparse.ArgumentParser(prog="fpmfft", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file of flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="build speed functions")
    p.add_argument("--x", required=True, help="row counts, a:b:step")
    p.add_argument("--y", required=True, help="FFT lengths, a:b:step")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--memory-budget", type=int, default=1 << 62, help="bytes")
    p.add_argument("--policy", choices=["full", "light"], default="full", help="repetition policy: size-tiered full policy or light")
    p.add_argument("--synthetic", action="store_true", help="synthetic clock and speed surface")
    p.add_argument("--no-resume", dest="resume", action="store_false")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", choices=["scipy", "numpy"], default=None)
    p.set_defaults(func=cmd_profile)

    for name, func in (("partition", cmd_partition), ("pad-plan", cmd_pad_plan)):
        p = sub.add_parser(name)
        p.add_argument("--n", type=int, required=True)
        _add_model_args(p)
        if name == "pad-plan":
            p.add_argument("--objective", choices=OBJECTIVES, default="time")
        p.set_defaults(func=func)

    p = sub.add_parser("run", help="transform one matrix")
    p.add_argument("--variant", choices=VARIANTS, default="seq")
    p.add_argument("--n", type=int, required=True)
    _add_model_args(p)
    _add_run_args(p)
    p.add_argument("--check", action="store_true", help="verify against a reference transform")
    p.add_argument("--input", help="matrix file (.txt for text format)")
    p.add_argument("--output", help="write the result (.txt for text format)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="speedup of one variant over another")
    p.add_argument("--baseline", choices=VARIANTS, default="seq")
    p.add_argument("--candidate", choices=VARIANTS, default="fpm")
    p.add_argument("--n-range", required=True, help="a:b:step or comma list")
    _add_model_args(p)
    _add_run_args(p)
    p.add_argument("--out", required=True, help="comparison CSV")
    p.add_argument("--plot-out", help="speed/variation CSV (default: <out>.plot.csv)")
    p.add_argument("--summary-out", help="summary JSON (default: <out>.summary.json)")
    p.add_argument("--strict", action="store_true", help="full measurement policy")
    p.add_argument("--min-sample-s", type=float, default=5e-3, help="minimum duration of one timed sample")
    p.add_argument("--rounds", type=int, default=7, help="alternating measurement rounds per n; the median-ratio round is reported")
    p.set_defaults(func=cmd_compare)

    for action in sub.choices.values():
        action.add_argument("--json", action="store_true", help="machine-readable output only")
    return parser


def _read_config(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UserError(f"{path}: line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = _read_config(known.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        defaults = {}
        for action in sp._actions:
            if action.dest in values:
                raw = values[action.dest]
                if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                    defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
                elif isinstance(action, argparse._AppendAction):
                    defaults[action.dest] = [v.strip() for v in raw.split(",")]
                else:
                    defaults[action.dest] = action.type(raw) if action.type else raw
                action.required = False
        sp.set_defaults(**defaults)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (UserError, OSError) as exc:
        print(f"fpmfft: error: {exc}", file=sys.stderr)
        return EXIT_USER
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UserError, DomainError, ModelFormatError, ModelNotFoundError) as exc:
        print(f"fpmfft: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"fpmfft: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
