"""Experiment orchestration and deterministic output files.

Each seed of a run writes ``seed_<s>.csv`` (one row per step, player and
context) and ``seed_<s>.svg``; ``summary.json`` is written once all seeds
have finished. With ``compare_modes`` set, every mode runs into its own
subdirectory and ``comparison.json`` lists the final win rates side by side.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import SLACK_TOL, BoundParams, Trajectory, summarize
from .config import RunConfig
from .dynamics import EXACT_MIRROR, run_dynamics
from .game import PreferenceGame, RngStream, STREAM_GAME, is_policy, random_game, validate_game
from .nash import NashConvergenceError, NashSolution, solve_nash

CSV_COLUMNS = (
    "t", "player", "context", "kl_to_star", "kl_to_tilde", "delta_qnorm",
    "winrate_vs_init", "exploitability", "loss", "lemma_slack", "flags",
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_COMPONENT = 4


class GameValidationError(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(str(v) for v in violations[:5]))
        self.violations = violations


def load_game(cfg: RunConfig) -> PreferenceGame:
    """Game from ``cfg.game_file`` if set, otherwise from the generator.

    Raises:
        GameValidationError: the game breaks a preference-game invariant.
    """
    if cfg.game_file is not None:
        g = PreferenceGame.load(cfg.game_file)
    else:
        gen = cfg.generator
        g = random_game(RngStream(gen.seed, STREAM_GAME), gen.n, gen.kind, gen.contexts)
    violations = validate_game(g)
    if violations:
        raise GameValidationError(violations)
    return g


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def trajectory_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in traj.records:
        for k, cid in enumerate(traj.context_ids):
            w.writerow([
                r.t, r.player, cid,
                _fmt(r.kl_to_star[k]), _fmt(r.kl_to_tilde[k]), _fmt(r.delta_qnorm[k]),
                _fmt(r.winrate_vs_init[k]), _fmt(r.exploitability[k]), _fmt(r.loss[k]),
                _fmt(r.lemma_slack[k]), r.flags[k],
            ])
    return buf.getvalue()


def trajectory_svg(traj: Trajectory, width: int = 640, height: int = 360) -> str:
    """Line plot of mean KL(pi*, pi_t) (left axis) and win rate vs pi_0 (right axis)."""
    ts = sorted({r.t for r in traj.records})
    kl = [np.mean([r.mean_kl_to_star for r in traj.records if r.t == t]) for t in ts]
    wr = [np.mean([r.mean_winrate_vs_init for r in traj.records if r.t == t]) for t in ts]
    m = 48
    pw, ph = width - 2 * m, height - 2 * m
    tmax = max(ts[-1], 1)
    kmax = max(max(kl), 1e-12)

    def pts(vals, vmax):
        return " ".join(
            f"{m + pw * t / tmax:.2f},{m + ph * (1 - v / vmax):.2f}" for t, v in zip(ts, vals)
        )

    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{m}" y="{m}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
        f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{pts(kl, kmax)}"/>',
        f'<polyline fill="none" stroke="#d62728" stroke-width="1.5" points="{pts(wr, 1.0)}"/>',
        f'<text x="{m}" y="{m - 10}" font-size="12" fill="#1f77b4">KL(pi*, pi_t), max {kmax:.4g}</text>',
        f'<text x="{width - m}" y="{m - 10}" font-size="12" fill="#d62728" text-anchor="end">win rate vs pi_0 (0..1)</text>',
        f'<text x="{m + pw / 2:.2f}" y="{height - 12}" font-size="12" text-anchor="middle">t (0..{tmax})</text>',
        "</svg>",
        "",
    ])


def invariant_failures(traj: Trajectory, cfg: RunConfig) -> list[str]:
    """Checks that must hold on every run; an empty list means clean."""
    out = []
    for pl in traj.final_policies:
        for k, p in enumerate(pl):
            if not is_policy(p, cfg.floor):
                out.append(f"final policy on {traj.context_ids[k]} is not a floored simplex point")
    checkable = cfg.update_mode == EXACT_MIRROR and not cfg.delta_literal_eq2
    if checkable:
        worst = min(
            (float(s) for r in traj.records for s, u in zip(r.lemma_slack, r.updated) if u),
            default=0.0,
        )
        if worst < SLACK_TOL:
            out.append(f"one-step inequality violated (slack {worst:.3g})")
        hb = traj.summary.get("horizon_bound")
        if hb is not None and not hb["holds"]:
            out.append("horizon bound violated")
    return out


@dataclass
class SeedResult:
    seed: int
    trajectory: Trajectory | None = None
    status: str = "ok"  # ok | invariant | component
    problems: list = field(default_factory=list)


def run_seed(cfg: RunConfig, g: PreferenceGame, nash: NashSolution, seed: int) -> SeedResult:
    traj = run_dynamics(cfg, g, nash, seed)
    summarize(traj, BoundParams(cfg.sigma, cfg.p_norm))
    res = SeedResult(seed, traj)
    if traj.error:
        res.status, res.problems = "component", [traj.error]
        return res
    problems = invariant_failures(traj, cfg)
    if problems:
        res.status, res.problems = "invariant", problems
    return res


def _write_outputs(out: Path, cfg: RunConfig, g: PreferenceGame, nash: NashSolution, results: list[SeedResult]) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    seeds = {}
    for res in results:
        traj = res.trajectory
        (out / f"seed_{res.seed}.csv").write_text(trajectory_csv(traj))
        (out / f"seed_{res.seed}.svg").write_text(trajectory_svg(traj))
        seeds[str(res.seed)] = {
            "status": res.status,
            "problems": res.problems,
            "summary": traj.summary,
        }
    summary = {
        "config": cfg.to_dict(),
        "game": g.to_dict(),
        "nash": nash.to_dict(),
        "seeds": seeds,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True, default=_json_default) + "\n")
    return summary


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _exit_for(results: list[SeedResult]) -> int:
    if any(r.status == "component" for r in results):
        return EXIT_COMPONENT
    if any(r.status == "invariant" for r in results):
        return EXIT_INVARIANT
    return EXIT_OK


def _run_single(cfg: RunConfig, g: PreferenceGame, nash: NashSolution, out: Path) -> tuple[int, dict]:
    results = [run_seed(cfg, g, nash, s) for s in cfg.seeds]
    summary = _write_outputs(out, cfg, g, nash, results)
    return _exit_for(results), summary


def run_command(cfg: RunConfig) -> tuple[int, dict]:
    """Solve, run and analyse every seed; write CSV, SVG and JSON artifacts.

    Returns ``(exit_code, summary)``. Exit codes: 0 success, 3 invariant
    violation (including an invalid game), 4 component failure.
    """
    out = Path(cfg.output_dir)
    try:
        g = load_game(cfg)
    except GameValidationError as e:
        return EXIT_INVARIANT, {"error": f"invalid game: {e}"}
    try:
        nash = solve_nash(g, cfg.nash_tol, cfg.nash_max_iter)
    except NashConvergenceError as e:
        return EXIT_COMPONENT, {"error": str(e)}

    if not cfg.compare_modes:
        return _run_single(cfg, g, nash, out)

    codes, per_mode = [], {}
    for mode in cfg.compare_modes:
        sub = cfg.replace(update_mode=mode, compare_modes=[], output_dir=str(out / mode))
        code, summary = _run_single(sub, g, nash, out / mode)
        codes.append(code)
        per_mode[mode] = {
            seed: {
                "status": s["status"],
                "final_winrate_vs_init": {p: v["final_winrate_vs_init"] for p, v in s["summary"]["players"].items()},
                "final_kl_to_star": {p: v["final_kl_to_star"] for p, v in s["summary"]["players"].items()},
                "final_exploitability": {p: v["final_exploitability"] for p, v in s["summary"]["players"].items()},
            }
            for seed, s in summary["seeds"].items()
        }
    comparison = {"modes": list(cfg.compare_modes), "results": per_mode}
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.json").write_text(json.dumps(comparison, indent=1, sort_keys=True) + "\n")
    return max(codes), comparison
