"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
Commands run in-process; ``serve`` starts the HTTP service.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pydantic import ValidationError

from .engine.config import ConfigError, Scenario, load_scenario
from .engine.metrics import write_csv
from .engine.runner import run_scenario
from .engine.sweep import SweepSpec, run_grid

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _floats(text: str, lo: float, hi: float, what: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}")
    if not vals:
        raise UsageError(f"{what}: at least one value required")
    bad = [v for v in vals if not lo <= v <= hi]
    if bad:
        raise UsageError(f"{what}: values must lie in [{lo}, {hi}], got {bad}")
    return vals


def cmd_run(config_path: str, seed: int | None, out_dir: str) -> int:
    sc = load_scenario(config_path)
    if seed is None:
        seed = sc.seeds[0] if sc.seeds else 0
    rep = run_scenario(sc, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(write_csv([rep]))
    (out / "metrics.json").write_text(rep.to_json() + "\n")
    return EXIT_OK


def cmd_sweep(spec_path: str, out_dir: str) -> int:
    try:
        data = json.loads(Path(spec_path).read_text())
        spec = SweepSpec.model_validate(data)
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        raise ConfigError(f"invalid sweep spec: {exc}")
    base = Scenario.model_validate(spec.base)
    run_grid(spec, base, out_dir, "sweep")
    return EXIT_OK


def cmd_attack(config_path: str, fractions: list[float], out_dir: str, seeds: int | None = None) -> int:
    base = load_scenario(config_path)
    spec = SweepSpec(axis="byzantine_fraction", values=fractions, pipelines=["hfgat", "fedavg_variant"],
                     seeds_per_cell=seeds or len(base.seeds) or 1)
    run_grid(spec, base, out_dir, "attack")
    return EXIT_OK


def cmd_privacy(config_path: str, levels: list[float], policies: list[str], out_dir: str,
                seeds: int | None = None) -> int:
    base = load_scenario(config_path)
    spec = SweepSpec(axis="threat_level", values=levels, pipelines=[base.pipeline],
                     seeds_per_cell=seeds or len(base.seeds) or 1, policies=policies)
    run_grid(spec, base, out_dir, "privacy")
    return EXIT_OK


def cmd_serve(host: str, port: int) -> int:
    import uvicorn

    from .service.app import create_app
    uvicorn.run(create_app(), host=host, port=port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hfgat", description="Hierarchical federated swarm simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True)

    s = sub.add_parser("sweep", help="run a parameter grid")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)

    a = sub.add_parser("attack", help="Byzantine-fraction grid for hfgat and fedavg_variant")
    a.add_argument("--config", required=True)
    a.add_argument("--fractions", default="0,0.1,0.2,0.3")
    a.add_argument("--seeds", type=int, help="seeds per cell (default: length of the config's seeds)")
    a.add_argument("--out", required=True)

    v = sub.add_parser("privacy", help="pinned threat-level grid per privacy policy")
    v.add_argument("--config", required=True)
    v.add_argument("--levels", default="0,0.25,0.5,0.75,1")
    v.add_argument("--policies", default="adaptive,static_low_eps,static_high_eps")
    v.add_argument("--seeds", type=int)
    v.add_argument("--out", required=True)

    h = sub.add_parser("serve", help="start the HTTP service")
    h.add_argument("--host", default="127.0.0.1")
    h.add_argument("--port", type=int, default=8000)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "run":
            return cmd_run(args.config, args.seed, args.out)
        if args.command == "sweep":
            return cmd_sweep(args.spec, args.out)
        if args.command == "attack":
            return cmd_attack(args.config, _floats(args.fractions, 0.0, 0.5, "--fractions"), args.out, args.seeds)
        if args.command == "privacy":
            policies = [x.strip() for x in args.policies.split(",") if x.strip()]
            allowed = {"adaptive", "static_low_eps", "static_high_eps"}
            if not policies or set(policies) - allowed:
                raise UsageError(f"--policies must be a subset of {sorted(allowed)}")
            return cmd_privacy(args.config, _floats(args.levels, 0.0, 1.0, "--levels"), policies, args.out,
                               args.seeds)
        if args.command == "serve":
            return cmd_serve(args.host, args.port)
    except (ConfigError, UsageError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_CONFIG


def run() -> None:  # pragma: no cover
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    run()
