"""Configuration-driven experiment runner.

Subcommands:
  run <config.json>        wire a workload to a solver, write CSV trace + JSON summary
  verify [suite ...]       run acceptance suites and print pass/fail per criterion
  lmo-check <dim> <trials> brute-force spot check of the linear minimization oracles

A run config is a single JSON object; unknown fields are rejected and a stable
digest of the canonical serialization is stamped into every output so a trace
can be traced back to the exact configuration that produced it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acceptance import SUITES, run_suites
from .core import Harmonic, Power
from .exceptions import UnsupportedConstraintError
from .gradients import LabeledVector, McSample
from .lmo import PowerIterConfig, TraceNormBall, lmo_l1, lmo_trace, lmo_vertices
from .metrics import loglog_slope, min_gap_tail
from .solvers import run as run_solver
from .workloads import (
    Workload,
    gen_classification,
    gen_fixed_design_lasso,
    gen_mc,
    gen_random_design_lasso,
)

CSV_HEADER = "t,n_t,kind,gamma,g_fw,g_aw,h_t,grad_err_inf,grad_err_op,f_value,elapsed_ns"

WORKLOAD_BUILDERS = {
    "fixed_design_lasso": gen_fixed_design_lasso,
    "random_design_lasso": gen_random_design_lasso,
    "mc": gen_mc,
    "classification": gen_classification,
}

_CONFIG_FIELDS = {
    "workload",
    "solver",
    "horizon",
    "batch_size",
    "inner_repeats",
    "cadence",
    "output_dir",
    "data_file",
}


@dataclass
class RunConfig:
    workload: dict
    solver: dict
    horizon: int
    batch_size: int = 1
    inner_repeats: int = 1
    cadence: str = "geometric"
    output_dir: str = "."
    data_file: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = set(raw) - _CONFIG_FIELDS
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        for required in ("workload", "solver", "horizon"):
            if required not in raw:
                raise ValueError(f"config is missing required field {required!r}")
        cfg = cls(**raw)
        if cfg.horizon < 1 or cfg.batch_size < 1 or cfg.inner_repeats < 1:
            raise ValueError("horizon, batch_size and inner_repeats must all be >= 1")
        if cfg.cadence not in ("geometric", "every"):
            raise ValueError(f"cadence must be 'geometric' or 'every', got {cfg.cadence!r}")
        if "kind" not in cfg.workload:
            raise ValueError("workload spec needs a 'kind'")
        if cfg.workload["kind"] not in WORKLOAD_BUILDERS:
            raise ValueError(
                f"unknown workload kind {cfg.workload['kind']!r}; "
                f"available: {sorted(WORKLOAD_BUILDERS)}"
            )
        if "kind" not in cfg.solver or cfg.solver["kind"] not in ("ofw", "oaw"):
            raise ValueError("solver spec needs kind 'ofw' or 'oaw'")
        schedule = cfg.solver.get("schedule", {"kind": "harmonic", "K": 2})
        if schedule.get("kind") not in ("harmonic", "power"):
            raise ValueError("schedule kind must be 'harmonic' or 'power'")
        return cfg

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "workload": self.workload,
            "solver": self.solver,
            "horizon": self.horizon,
            "batch_size": self.batch_size,
            "inner_repeats": self.inner_repeats,
            "cadence": self.cadence,
            "output_dir": self.output_dir,
            "data_file": self.data_file,
        }

    def build_schedule(self):
        spec = self.solver.get("schedule", {"kind": "harmonic", "K": 2})
        if spec["kind"] == "harmonic":
            return Harmonic(int(spec.get("K", 2)))
        return Power(float(spec.get("alpha", 0.75)))

    def build_workload(self) -> Workload:
        spec = dict(self.workload)
        kind = spec.pop("kind")
        return WORKLOAD_BUILDERS[kind](**spec)


def ingest_mc_triplets(path, shape: tuple[int, int] | None = None):
    """Yield matrix-entry samples from a CSV of ``k,l,y`` lines (0-based indices).

    A header line ``k,l,y`` is skipped when present. Malformed lines and
    out-of-range indices raise with the offending line number.
    """
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if lineno == 1 and line.replace(" ", "").lower() == "k,l,y":
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'k,l,y', got {line!r}")
            try:
                row, col, value = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if shape is not None and not (0 <= row < shape[0] and 0 <= col < shape[1]):
                raise ValueError(f"{path}:{lineno}: cell ({row}, {col}) outside {shape}")
            yield McSample(row, col, value)


def ingest_labeled_sparse(path, dim: int | None = None):
    """Parse the common sparse classification text format into labeled samples.

    Each line is a label (+1, -1, 0 or 1; 0 maps to -1) followed by 1-based
    ``index:value`` pairs. The dimension is declared or inferred from the
    largest index in the file. Returns a list (the file is read twice
    otherwise when inferring the dimension).
    """
    parsed = []
    max_index = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            try:
                label_val = int(float(parts[0]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            if label_val not in (-1, 0, 1):
                raise ValueError(f"{path}:{lineno}: label must be in {{-1, 0, +1}}")
            label = -1 if label_val <= 0 else 1
            entries = []
            for pair in parts[1:]:
                if ":" not in pair:
                    raise ValueError(f"{path}:{lineno}: malformed pair {pair!r}")
                idx_s, val_s = pair.split(":", 1)
                try:
                    idx, val = int(idx_s), float(val_s)
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
                if idx < 1:
                    raise ValueError(f"{path}:{lineno}: indices are 1-based, got {idx}")
                entries.append((idx - 1, val))
                max_index = max(max_index, idx)
            parsed.append((label, entries))
    if dim is None:
        dim = max_index
    samples = []
    for label, entries in parsed:
        x = np.zeros(dim)
        for idx, val in entries:
            if idx >= dim:
                raise ValueError(f"index {idx + 1} exceeds declared dimension {dim}")
            x[idx] = val
        samples.append(LabeledVector(x, label))
    return samples


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, trace, f_star: float | None) -> None:
    evals_by_t = {ev.t: ev for ev in trace.evals}
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in trace.records:
            ev = evals_by_t.get(rec.t)
            h_t = None
            f_value = None
            err_inf = None
            err_op = None
            if ev is not None:
                f_value = ev.f_value
                err_inf = ev.grad_err_inf
                err_op = ev.grad_err_op
                if ev.f_value is not None and f_star is not None:
                    h_t = ev.f_value - f_star
            fh.write(
                ",".join(
                    [
                        str(rec.t),
                        str(rec.n),
                        rec.kind,
                        _fmt(rec.gamma),
                        _fmt(rec.g_fw),
                        _fmt(rec.g_aw),
                        _fmt(h_t),
                        _fmt(err_inf),
                        _fmt(err_op),
                        _fmt(f_value),
                        str(rec.elapsed_ns),
                    ]
                )
                + "\n"
            )


def execute_run(config: RunConfig, out_dir: Path | None = None) -> dict:
    """Build, run, and persist one configured experiment. Returns the summary."""
    workload = config.build_workload()
    schedule = config.build_schedule()
    if config.solver["kind"] == "oaw" and isinstance(workload.constraint, TraceNormBall):
        raise UnsupportedConstraintError(
            "solver 'oaw' cannot run on a trace-norm ball; use 'ofw' or an l1/polytope workload"
        )

    if config.data_file is not None:
        if workload.name == "mc":
            shape = workload.constraint.shape
            stream = iter(list(ingest_mc_triplets(config.data_file, shape)))
        elif workload.name == "classification":
            dim = int(np.prod(workload.constraint.shape))
            stream = iter(ingest_labeled_sparse(config.data_file, dim))
        else:
            raise ValueError(f"data files are not supported for workload {workload.name!r}")
    else:
        stream = workload.make_stream()

    digest = config.digest()
    started = time.perf_counter()
    trace = run_solver(
        config.solver["kind"],
        workload.make_oracle(),
        workload.constraint,
        schedule,
        config.horizon,
        stream,
        batch_size=config.batch_size,
        inner_repeats=config.inner_repeats,
        f=workload.f,
        grad_f=workload.grad_f,
        cadence=config.cadence,
        metadata={"digest": digest},
    )
    wall = time.perf_counter() - started

    out_dir = Path(out_dir if out_dir is not None else config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{workload.name}_{config.solver['kind']}_{digest}"
    csv_path = out_dir / f"{stem}.csv"
    write_csv(csv_path, trace, workload.f_star)

    kinds = {"FW": 0, "AW": 0, "Drop": 0}
    for rec in trace.records:
        kinds[rec.kind] += 1

    summary = {
        "digest": digest,
        "config": config.to_dict(),
        "records": len(trace.records),
        "truncated": trace.truncated,
        "step_kinds": kinds,
        "wall_time_s": wall,
        "csv": csv_path.name,
    }
    if "saturation_count" in trace.metadata:
        summary["saturation_count"] = trace.metadata["saturation_count"]

    h_series = None
    if workload.f_star is not None:
        h_series = [(t, v - workload.f_star) for t, v in trace.eval_series("f_value")]
        summary["final_h"] = h_series[-1][1] if h_series else None
    f_series = trace.eval_series("f_value")
    if f_series:
        summary["final_f"] = f_series[-1][1]
    window = (max(10, config.horizon // 100), config.horizon)
    if h_series:
        try:
            fit = loglog_slope(h_series, window)
            summary["h_slope"] = {
                "window": list(window),
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
            }
        except ValueError:
            summary["h_slope"] = None
    err_series = trace.eval_series("grad_err_inf")
    if err_series:
        try:
            fit = loglog_slope(err_series, window)
            summary["grad_err_slope"] = {
                "window": list(window),
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
            }
        except ValueError:
            summary["grad_err_slope"] = None
    if trace.records:
        total_steps = trace.records[-1].t
        gap = "aw" if config.solver["kind"] == "oaw" else "fw"
        try:
            summary["min_gap_tail"] = {
                "gap": gap,
                "horizon": total_steps,
                "value": min_gap_tail(trace, total_steps, gap=gap),
            }
        except ValueError:
            summary["min_gap_tail"] = None

    json_path = out_dir / f"{stem}.json"
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    summary["json"] = json_path.name
    return summary


def cmd_run(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot load config {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        config = RunConfig.from_dict(raw)
        summary = execute_run(config)
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2))
    return 0


def cmd_verify(args) -> int:
    names = args.suite or None
    try:
        results = run_suites(names)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed")
    return 0 if not failed else 1


def cmd_lmo_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    dim, trials = args.dim, args.trials
    mismatches = 0
    vertices = rng.standard_normal((2 * dim, dim))
    for k in range(trials):
        g = rng.standard_normal(dim)
        atom = lmo_l1(g, 1.0)
        best = min((s * g[i], i, s) for i in range(dim) for s in (-1, 1))
        if (atom.index, atom.sign) != (best[1], best[2]):
            mismatches += 1
        vatom = lmo_vertices(g, vertices)
        if vatom.vertex_id != int(np.argmin(vertices @ g)):
            mismatches += 1
        mat = rng.standard_normal((dim, max(1, dim - 1)))
        tatom = lmo_trace(mat, 1.0, PowerIterConfig(seed=k))
        sigma = float(np.linalg.svd(mat, compute_uv=False)[0])
        if abs(tatom.dot(mat) + sigma) > 1e-6 * sigma:
            mismatches += 1
    print(f"lmo-check: dim={dim} trials={trials} mismatches={mismatches}")
    return 0 if mismatches == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onlinefw", description="projection-free online optimization toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured experiment")
    p_run.add_argument("config", help="path to a JSON run config")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="run acceptance suites")
    p_verify.add_argument(
        "suite", nargs="*", help=f"suites to run (default all): {', '.join(SUITES)}"
    )
    p_verify.set_defaults(func=cmd_verify)

    p_lmo = sub.add_parser("lmo-check", help="brute-force check of the linear oracles")
    p_lmo.add_argument("dim", type=int)
    p_lmo.add_argument("trials", type=int)
    p_lmo.add_argument("--seed", type=int, default=0)
    p_lmo.set_defaults(func=cmd_lmo_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
