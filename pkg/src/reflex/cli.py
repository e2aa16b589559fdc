"""Command-line entry point: run benchmark suites, replay single episodes, emit scene specs.

    reflex run --family fdo --episodes 100 --seed 7 --policy interpolator --dcp-rmp
    reflex replay scene.json --policy repulsive --no-dcp-rmp
    reflex gen --family dgb --seed 3 > scene.json

Exit codes: 0 ok, 1 I/O error, 2 usage or input error, 3 faulted episodes under --strict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from importlib import resources
from pathlib import Path

from reflex.errors import RejectedInput
from reflex.kinematics import load_model
from reflex.policy import REGISTRY, make_policy
from reflex.rmp import RmpParams
from reflex.simbench.episode import EpisodeReport, SimConfig, aggregate, run_episode
from reflex.simbench.generate import Difficulty, GenerationError, generate_scenario
from reflex.simbench.scene import FAMILIES, SceneSpec

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_FAULT = 0, 1, 2, 3

CSV_HEADER = [
    "family",
    "policy",
    "dcp_rmp",
    "episodes",
    "reach_rate",
    "collision_rate",
    "success_rate",
    "mean_min_clearance",
    "faults",
]

# keys a run configuration may carry; a config file may set any of them
RUN_KEYS = (
    "family",
    "episodes",
    "seed",
    "policy",
    "dcp_rmp",
    "ablate",
    "params",
    "difficulty",
    "rate",
    "horizon",
    "noise",
    "out_jsonl",
    "out_csv",
    "jobs",
    "strict",
    "trajectory",
)


class UsageError(Exception):
    pass


def default_config() -> dict:
    """The shipped run configuration (tuned goal-proposal gains and benchmark defaults)."""
    return json.loads(resources.files("reflex.data").joinpath("default_config.json").read_text())


def write_atomic(path: str | Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file in the same directory and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent if str(path.parent) else ".")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep or not name:
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        if name not in RmpParams.field_names():
            raise UsageError(f"unknown RMP parameter {name!r}; known: {', '.join(RmpParams.field_names())}")
        try:
            out[name] = float(value)
        except ValueError:
            raise UsageError(f"--param {name} needs a number, got {value!r}") from None
    return out


def _families(name: str) -> list:
    name = name.upper()
    if name == "ALL":
        return list(FAMILIES)
    if name not in FAMILIES:
        raise UsageError(f"unknown family {name.lower()!r}; choose from {', '.join(f.lower() for f in FAMILIES)}, all")
    return [name]


def _policies(spec: str) -> list:
    names = [p.strip() for p in spec.split(",") if p.strip()]
    for p in names:
        if p not in REGISTRY:
            raise UsageError(f"unknown policy {p!r}; choose from {', '.join(sorted(REGISTRY))}")
    if not names:
        raise UsageError("no policy given")
    return names


def resolve_run_config(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < command-line flags and validate the result."""
    cfg = default_config()
    cfg["seed"] = int(os.environ.get("REFLEX_SEED", cfg["seed"])) if os.environ.get("REFLEX_SEED", "").strip() else cfg["seed"]
    if args.config:
        try:
            user = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(user) - set(RUN_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        for key in ("params", "difficulty"):
            if key in user:
                cfg[key] = {**cfg[key], **user.pop(key)}
        cfg.update(user)
    for key in RUN_KEYS:
        if key in ("params",):
            continue
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["params"] = {**cfg["params"], **parse_overrides(args.param)}

    try:
        cfg["params_obj"] = RmpParams.from_dict(cfg["params"])
        cfg["difficulty_obj"] = Difficulty.from_dict(cfg["difficulty"])
        cfg["sim"] = SimConfig(rate_hz=float(cfg["rate"]), horizon=int(cfg["horizon"]), noise_sigma=float(cfg["noise"]))
    except (RejectedInput, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if int(cfg["episodes"]) < 1:
        raise UsageError("--episodes must be >= 1")
    if int(cfg["jobs"]) < 1:
        raise UsageError("--jobs must be >= 1")
    if float(cfg["noise"]) < 0:
        raise UsageError("--noise must be >= 0")
    cfg["families"] = _families(str(cfg["family"]))
    cfg["policies"] = _policies(str(cfg["policy"]))
    return cfg


# --- episode fan-out ------------------------------------------------------------


@lru_cache(maxsize=1)
def _model():
    return load_model()


def _episode_job(job: tuple) -> str:
    family, seed, policy, dcp_rmp, params, difficulty, sim, trajectory = job
    model = _model()
    spec = generate_scenario(family, seed, Difficulty.from_dict(difficulty), model)
    sim = SimConfig(**sim)
    pol = make_policy(policy, model, sim.dt)
    report = run_episode(spec, pol, dcp_rmp, RmpParams.from_dict(params), model, sim, log_trajectory=trajectory)
    return report.to_json()


def _jobs(cfg: dict) -> list:
    sim = cfg["sim"]
    sim_d = {"rate_hz": sim.rate_hz, "horizon": sim.horizon, "noise_sigma": sim.noise_sigma}
    flags = [False, True] if cfg["ablate"] else [bool(cfg["dcp_rmp"])]
    base = int(cfg["seed"])
    diff = {k: list(v) if isinstance(v, tuple) else v for k, v in vars(cfg["difficulty_obj"]).items()}
    return [
        (fam, base + i, pol, flag, cfg["params_obj"].to_dict(), diff, sim_d, bool(cfg["trajectory"]))
        for fam in cfg["families"]
        for pol in cfg["policies"]
        for flag in flags
        for i in range(int(cfg["episodes"]))
    ]


def run_jobs(jobs: list, n_jobs: int) -> list:
    """Run episode jobs, serially or across worker processes; results come back in job order."""
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_episode_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_episode_job, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))


# --- outputs --------------------------------------------------------------------


def _method(policy: str, dcp_rmp: bool) -> str:
    return f"{policy}+dcp-rmp" if dcp_rmp else policy


def summarize(reports: list) -> list:
    """One summary row per (family, policy, dcp_rmp), in family order."""
    groups: dict = {}
    for r in reports:
        groups.setdefault((r.family, r.policy, r.dcp_rmp), []).append(r)
    order = {f: i for i, f in enumerate(FAMILIES)}
    rows = []
    for key in sorted(groups, key=lambda k: (order[k[0]], k[1], k[2])):
        s = aggregate(groups[key])
        rows.append(
            {
                "family": key[0],
                "policy": key[1],
                "dcp_rmp": int(key[2]),
                "episodes": s.episodes,
                "reach_rate": s.reach_rate,
                "collision_rate": s.collision_rate,
                "success_rate": s.success_rate,
                "mean_min_clearance": s.mean_min_clearance,
                "faults": s.faults,
            }
        )
    return rows


def csv_text(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(
            [
                row["family"],
                row["policy"],
                row["dcp_rmp"],
                row["episodes"],
                f"{row['reach_rate']:.2f}",
                f"{row['collision_rate']:.2f}",
                f"{row['success_rate']:.2f}",
                f"{row['mean_min_clearance']:.6f}",
                row["faults"],
            ]
        )
    return buf.getvalue()


def table_text(rows: list) -> str:
    """Methods down, families across; each cell is ``S (R/C)`` in percent."""
    fams = [f for f in FAMILIES if any(r["family"] == f for r in rows)]
    methods = []
    for r in rows:
        m = _method(r["policy"], bool(r["dcp_rmp"]))
        if m not in methods:
            methods.append(m)
    cells = {(_method(r["policy"], bool(r["dcp_rmp"])), r["family"]): r for r in rows}
    header = ["method", *fams]
    body = []
    for m in methods:
        line = [m]
        for f in fams:
            r = cells.get((m, f))
            line.append("-" if r is None else f"{r['success_rate']:.1f} ({r['reach_rate']:.0f}/{r['collision_rate']:.0f})")
        body.append(line)
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
    lines = [fmt(header), "  ".join("-" * w for w in widths), *map(fmt, body)]
    lines.append("cells: success % (reach % / collision %)")
    return "\n".join(lines) + "\n"


# --- subcommands ----------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    cfg = resolve_run_config(args)
    lines = run_jobs(_jobs(cfg), int(cfg["jobs"]))
    reports = [EpisodeReport.from_json(s) for s in lines]
    rows = summarize(reports)
    if cfg.get("out_jsonl"):
        write_atomic(cfg["out_jsonl"], "".join(s + "\n" for s in lines))
    if cfg.get("out_csv"):
        write_atomic(cfg["out_csv"], csv_text(rows))
    sys.stdout.write(table_text(rows))
    faults = sum(r.faulted for r in reports)
    if faults:
        print(f"{faults} episode(s) faulted", file=sys.stderr)
        if cfg["strict"]:
            return EXIT_FAULT
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        text = Path(args.scene).read_text()
    except OSError as exc:
        print(f"error: cannot read {args.scene}: {exc}", file=sys.stderr)
        return EXIT_IO
    spec = SceneSpec.from_json(text)  # RejectedInput -> usage exit
    cfg = default_config()
    params = RmpParams.from_dict({**cfg["params"], **parse_overrides(args.param)})
    sim = SimConfig(
        rate_hz=float(args.rate if args.rate is not None else cfg["rate"]),
        horizon=int(args.horizon if args.horizon is not None else cfg["horizon"]),
        noise_sigma=float(args.noise if args.noise is not None else cfg["noise"]),
    )
    policy_name = _policies(args.policy or cfg["policy"])[0]
    dcp_rmp = bool(cfg["dcp_rmp"] if args.dcp_rmp is None else args.dcp_rmp)
    model = _model()
    records = []
    report = run_episode(
        spec, make_policy(policy_name, model, sim.dt), dcp_rmp, params, model, sim, log_trajectory=args.trajectory, on_tick=records.append
    )
    ticks = "".join(json.dumps(r) + "\n" for r in records)
    if args.out_jsonl:
        write_atomic(args.out_jsonl, ticks)
    else:
        sys.stdout.write(ticks)
    sys.stdout.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    fams = _families(args.family)
    diff = Difficulty.from_dict(default_config()["difficulty"])
    seed = args.seed if args.seed is not None else int(os.environ.get("REFLEX_SEED", "0") or 0)
    specs = [generate_scenario(f, seed + i, diff, _model()) for f in fams for i in range(args.episodes)]
    if args.out_dir is None:
        if len(specs) != 1:
            raise UsageError("several scenes requested; pass --out-dir")
        sys.stdout.write(specs[0].to_json() + "\n")
        return EXIT_OK
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in specs:
        write_atomic(out / f"{s.family.lower()}_{s.seed}.json", s.to_json() + "\n")
    return EXIT_OK


# --- argument parsing -----------------------------------------------------------


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--param", action="append", metavar="NAME=VALUE", help="override one goal-proposal gain (repeatable)")
    p.add_argument("--rate", type=float, help="control rate in Hz (default 50)")
    p.add_argument("--horizon", type=int, help="episode length in ticks (default 1000)")
    p.add_argument("--noise", type=float, help="std. dev. of Gaussian scene-cloud jitter in m (default 0)")
    p.add_argument("--dcp-rmp", dest="dcp_rmp", action=argparse.BooleanOptionalAction, default=None, help="shape the goal with DCP-RMP")
    p.add_argument("--trajectory", action=argparse.BooleanOptionalAction, default=None, help="log per-tick joint positions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reflex", description="Reactive goal shaping around moving obstacles: benchmark runner.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark suite and write reports")
    run.add_argument("--family", help="se, sao, fdo, gb, dgb or all (default all)")
    run.add_argument("--episodes", type=int, help="episodes per family (seeds base..base+n-1)")
    run.add_argument("--seed", type=int, help="base seed (falls back to $REFLEX_SEED, then 0)")
    run.add_argument("--policy", help=f"downstream policy, or a comma list; one of {', '.join(sorted(REGISTRY))}")
    run.add_argument("--ablate", action=argparse.BooleanOptionalAction, default=None, help="run every policy with and without DCP-RMP")
    run.add_argument("--config", help="JSON run configuration (flags override it)")
    run.add_argument("--out-jsonl", dest="out_jsonl", help="write one EpisodeReport per line")
    run.add_argument("--out-csv", dest="out_csv", help="write the suite summary CSV")
    run.add_argument("--jobs", type=int, help="worker processes (default 1)")
    run.add_argument("--strict", action=argparse.BooleanOptionalAction, default=None, help="exit 3 if any episode faulted")
    _add_sim_flags(run)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("replay", help="re-run one scene and emit per-tick debug records")
    rep.add_argument("scene", help="SceneSpec JSON file")
    rep.add_argument("--policy", help=f"one of {', '.join(sorted(REGISTRY))}")
    rep.add_argument("--out-jsonl", dest="out_jsonl", help="write tick records here instead of standard output")
    _add_sim_flags(rep)
    rep.set_defaults(func=cmd_replay)

    gen = sub.add_parser("gen", help="emit SceneSpec JSON for (family, seed)")
    gen.add_argument("--family", required=True, help="se, sao, fdo, gb, dgb or all")
    gen.add_argument("--seed", type=int, help="base seed (falls back to $REFLEX_SEED, then 0)")
    gen.add_argument("--episodes", type=int, default=1, help="number of consecutive seeds")
    gen.add_argument("--out-dir", dest="out_dir", help="write <family>_<seed>.json files here")
    gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, RejectedInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
