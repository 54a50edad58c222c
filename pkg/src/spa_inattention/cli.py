"""Command-line pipeline: solve, simulate, analyze, verify.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 missing or stale input artifact.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import pandas as pd

from . import __version__
from .beliefs import belief_error_stats
from .config import RunConfig, default_config_text
from .econometrics import RegressionSpec, treatment_report, treatment_table
from .exceptions import ConfigError, ConvergenceError, DomainError
from .oracles import oracle_suite
from .parallel import default_workers
from .persist import load_solution, save_solution
from .re_solver import solve_re
from .ri_solver import solve_ri
from .simulator import age_profiles, choice_prob_diff_map, read_panel, simulate_panel, summary_stats, write_panel
from .statespace import Environment

log = logging.getLogger("spa_inattention")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISSING = 0, 2, 3, 4


class MissingArtifact(Exception):
    pass


class Run:
    def __init__(self, cfg: RunConfig, out: Path, workers: int):
        self.cfg = cfg
        self.out = out
        self.workers = workers
        out.mkdir(parents=True, exist_ok=True)
        self.manifest_path = out / "manifest.json"
        self.manifest = json.loads(self.manifest_path.read_text()) if self.manifest_path.exists() else {}
        self._env = None

    @property
    def env(self) -> Environment:
        if self._env is None:
            self._env = Environment.build(self.cfg.model(), self.cfg.grid_spec())
        return self._env

    # ------------------------------------------------------------ bookkeeping

    def record(self, command: str, paths, seconds: float, extra=None):
        m = self.manifest
        m["tool_version"] = __version__
        m["config_hash"] = self.cfg.hash()
        m["model_hash"] = self.cfg.model_hash()
        m["seed"] = self.cfg["seed"]
        arts = m.setdefault("artifacts", {})
        for p in paths:
            arts[str(Path(p).relative_to(self.out))] = _sha256(p)
        m.setdefault("timings", {})[command] = round(seconds, 3)
        if extra:
            m.update(extra)
        (self.out / "config.resolved.conf").write_text(self.cfg.dump())
        self.manifest_path.write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")

    def csv(self, frame: pd.DataFrame, name: str) -> Path:
        path = self.out / name
        frame.to_csv(path, index=False)
        return path

    def solution(self, kind: str):
        d = self.out / f"solution_{kind}"
        if not (d / "meta.json").exists():
            raise MissingArtifact(f"missing {kind.upper()} solution at {d}; run solve-{kind} first")
        solved = self.manifest.get("solutions", {}).get(kind)
        if solved != self.cfg.model_hash():
            raise MissingArtifact(
                f"stale solution: {d} was solved for config {str(solved)[:12]}, "
                f"current model config is {self.cfg.model_hash()[:12]}; re-run solve-{kind}"
            )
        return load_solution(d, self.env)

    def has_solution(self, kind):
        return (self.out / f"solution_{kind}" / "meta.json").exists()

    def panel(self, kind: str):
        path = self.out / f"panel_{kind}.csv"
        if not path.exists():
            raise MissingArtifact(f"missing panel {path}; run simulate first")
        return read_panel(path)

    # ------------------------------------------------------------ commands

    def solve_re(self):
        t0 = time.perf_counter()
        sol = solve_re(self.env, workers=self.workers)
        paths = save_solution(sol, self.out / "solution_re")
        paths.append(self.csv(sol.to_frame(), "re_values.csv"))
        self._mark_solved("re", "solve-re", paths, t0)

    def solve_ri(self):
        t0 = time.perf_counter()
        sol = solve_ri(self.env, lam=self.cfg["model.lambda"], workers=self.workers,
                       tol=self.cfg["ri.tol"], max_iter=self.cfg["ri.max_iter"])
        paths = save_solution(sol, self.out / "solution_ri")
        paths.append(self.csv(sol.to_frame(), "ri_values.csv"))
        paths.append(self.csv(sol.info_frame(), "ri_info_flow.csv"))
        for age in self.cfg["output.choice_rule_ages"]:
            if age in sol.default_rule:
                paths.append(self.csv(sol.default_frame(age), f"ri_default_rule_age{age}.csv"))
                paths.append(self.csv(sol.choice_frame(age), f"ri_choice_rule_age{age}.csv"))
        self._mark_solved("ri", "solve-ri", paths, t0)

    def _mark_solved(self, kind, command, paths, t0):
        sols = self.manifest.setdefault("solutions", {})
        sols[kind] = self.cfg.model_hash()
        self.record(command, paths, time.perf_counter() - t0)

    def simulate(self):
        t0 = time.perf_counter()
        scenario = self.cfg.scenario()
        kinds = ["re"] + (["ri"] if self.has_solution("ri") else [])
        paths = []
        for kind in kinds:
            sol = self.solution(kind)
            panel = simulate_panel(sol, scenario)
            path = self.out / f"panel_{kind}.csv"
            write_panel(panel, path)
            paths.append(path)
            paths.append(self.csv(age_profiles(panel), f"profiles_{kind}.csv"))
            rows = []
            for label, age in (("age58", 58), ("pooled", None)):
                _, share = belief_error_stats(panel, age)
                rows.append({"sample": label, "share_within_one_year": share})
            paths.append(self.csv(pd.DataFrame(rows), f"belief_share_{kind}.csv"))
        self.record("simulate", paths, time.perf_counter() - t0)

    def analyze(self):
        t0 = time.perf_counter()
        spec = RegressionSpec(age_min=self.cfg["regression.age_min"], age_max=self.cfg["regression.age_max"],
                              extra_controls=self.cfg["regression.controls"])
        panel_re = self.panel("re")
        paths = [self.csv(treatment_table(panel_re, spec), "treatment_re.csv")]
        panels = {"re": panel_re}
        if (self.out / "panel_ri.csv").exists():
            panels["ri"] = self.panel("ri")
            paths.append(self.csv(treatment_table(panels["ri"], spec), "treatment_ri.csv"))
            paths.append(self.csv(treatment_report(panel_re, panels["ri"], spec), "treatment_report.csv"))
        stats = [summary_stats(p, "assets").assign(model=k.upper()) for k, p in panels.items()]
        paths.append(self.csv(pd.concat(stats, ignore_index=True), "summary_assets.csv"))
        for kind, panel in panels.items():
            for label, age in (("age58", 58), ("pooled", None)):
                hist, _ = belief_error_stats(panel, age)
                paths.append(self.csv(hist, f"belief_histogram_{kind}_{label}.csv"))
        if "ri" in panels and self.has_solution("ri"):
            sol_re, sol_ri = self.solution("re"), self.solution("ri")
            for age in self.cfg["output.choice_rule_ages"]:
                paths.append(self.csv(choice_prob_diff_map(sol_ri, sol_re, age), f"choice_prob_diff_age{age}.csv"))
        self.record("analyze", paths, time.perf_counter() - t0)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def oracle_check(tol_scale: float) -> int:
    results = oracle_suite(tol_scale)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:40s} residual {r.residual:.3e}  tol {r.tolerance:.1e}")
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "some checks failed")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spa-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve-re", "solve-ri", "simulate", "analyze", "oracle-check", "all"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="config file (default: the shipped default.conf)")
        p.add_argument("--out", help="output directory (default: output.dir from the config)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, default=default_workers())
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "oracle-check":
            p.add_argument("--tol-scale", type=float, default=1.0,
                           help="multiply every tolerance (development aid; 0 forces failures)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "oracle-check":
            return oracle_check(args.tol_scale)
        cfg = RunConfig.load(args.config) if args.config else RunConfig.parse(default_config_text(), "default.conf")
        if args.seed is not None:
            cfg = cfg.with_values(seed=args.seed)
        run = Run(cfg, Path(args.out or cfg["output.dir"]), max(1, args.workers))
        steps = {
            "solve-re": [run.solve_re],
            "solve-ri": [run.solve_ri],
            "simulate": [run.simulate],
            "analyze": [run.analyze],
            "all": [run.solve_re, run.solve_ri, run.simulate, run.analyze],
        }[args.command]
        for step in steps:
            step()
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DomainError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MissingArtifact, FileNotFoundError) as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
