"""Acceptance battery: every exit criterion as a named, timed check.

Each ``check_*`` function runs one criterion at its full size and returns a
``CriterionResult``. ``run_battery`` executes them in order; ``verify`` in
the CLI prints the resulting table.
"""
from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import SLACK_TOL, BoundParams, horizon_bound_check, summarize
from .config import RunConfig, parse_config
from .dynamics import (
    SGD_LOSS_CORRECTED,
    SGD_LOSS_PAPER,
    adaptive_delta,
    geometric_mixture,
    lana_loss,
    lana_loss_grad,
    maio_update,
    run_dynamics,
)
from .game import RngStream, apply_floor, expected_winrate, random_game, rps_matrix, validate_game
from .harness import load_game, run_command, GameValidationError
from .nash import brute_force_nash, exploitability, solve_nash

JUDGE_CYCLE = ("ground_truth_deterministic", "ground_truth_sampled", "self_judge", "expert")
KIND_CYCLE = ("uniform", "condorcet", "cyclic")


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float | None = None

    def line(self, timing: bool = True) -> str:
        """Table row; ``timing=False`` drops the wall-clock part so reports compare equal."""
        mark = "PASS" if self.passed else "FAIL"
        row = f"[{mark}] {self.number}. {self.name}: {self.detail}"
        if not timing:
            return row
        budget = f" / {self.budget:.0f}s" if self.budget else ""
        return f"{row} ({self.seconds:.2f}s{budget})"


def _timed(number, name, budget, fn) -> CriterionResult:
    t0 = time.perf_counter()
    passed, detail = fn()
    dt = time.perf_counter() - t0
    if budget is not None and dt > budget:
        passed = False
        detail += f"; over runtime budget {budget}s"
    return CriterionResult(number, name, passed, detail, dt, budget)


def check_geometric_mixture(trials: int = 1000, seed: int = 11) -> CriterionResult:
    def body():
        gen = RngStream(seed, 101).generator()
        worst = 0.0
        for _ in range(trials):
            n = int(gen.integers(2, 51))
            pi_t = apply_floor(gen.dirichlet(np.ones(n)))
            pi_tilde = apply_floor(gen.dirichlet(np.ones(n)))
            gamma = 1.0 - gen.random()  # (0, 1]
            got = maio_update(pi_t, adaptive_delta(pi_t, pi_tilde, gamma))
            worst = max(worst, float(np.max(np.abs(got - geometric_mixture(pi_t, pi_tilde, gamma)))))
        return worst <= 1e-12, f"max abs error {worst:.2e} over {trials} triples (tol 1e-12)"
    return _timed(1, "geometric-mixture identity", 5, body)


def tournament_suite(runs: int = 100, steps: int = 200) -> list[tuple[RunConfig, int]]:
    """Configs for the ExactMirror tournament suite, n <= 10."""
    out = []
    gammas = (0.05, 0.1, 0.3, 0.5, 1.0)
    for r in range(runs):
        cfg = parse_config({
            "generator": {"seed": 1000 + r, "n": 2 + r % 9, "contexts": 1 + (r % 7 == 0), "kind": KIND_CYCLE[r % 3]},
            "update_mode": "exact_mirror",
            "judge": JUDGE_CYCLE[r % 4],
            "noise_epsilon": 0.1 if r % 5 == 0 else 0.0,
            "construction": "smoothed_preferred",
            "gamma": gammas[r % 5],
            "T": steps,
            "seeds": [r],
        })
        out.append((cfg, r))
    return out


def check_lemma_and_horizon(runs: int = 100, steps: int = 200) -> tuple[CriterionResult, CriterionResult]:
    t0 = time.perf_counter()
    violations, total_steps, worst = 0, 0, math.inf
    bound_fail, missing_components = [], 0
    for cfg, seed in tournament_suite(runs, steps):
        g = load_game(cfg)
        nash = solve_nash(g, cfg.nash_tol)
        traj = run_dynamics(cfg, g, nash, seed)
        if traj.error:
            violations += 1
            continue
        for rec in traj.records:
            for s, u in zip(rec.lemma_slack, rec.updated):
                if u:
                    total_steps += 1
                    worst = min(worst, float(s))
                    violations += s < SLACK_TOL
        hb = horizon_bound_check(traj, BoundParams(cfg.sigma, cfg.p_norm))
        if not hb["holds"]:
            bound_fail.append(seed)
        for row in hb["components"]:
            if not all(k in row for k in ("kl_to_tilde_c", "contraction_term", "norm_term")):
                missing_components += 1
    dt = time.perf_counter() - t0
    lemma = CriterionResult(
        2, "one-step inequality", violations == 0 and dt <= 60,
        f"{violations} violations beyond {SLACK_TOL:g} over {total_steps} updates, min slack {worst:.2e}",
        dt, 60,
    )
    horizon = CriterionResult(
        3, "horizon bound", not bound_fail and missing_components == 0,
        f"holds on {runs - len(bound_fail)}/{runs} runs; components reported for all rows: {missing_components == 0}",
        0.0, None,
    )
    return lemma, horizon


def check_expert_contraction(games: int = 20, steps: int = 50, gamma: float = 0.3) -> CriterionResult:
    def body():
        worst = math.inf
        for r in range(games):
            gen = RngStream(2000 + r, 102).generator()
            n = int(gen.integers(2, 11))
            g = random_game(gen, n, KIND_CYCLE[r % 3])
            cfg = parse_config({
                "construction": "expert_policy", "gamma": gamma, "T": steps, "seeds": [r],
                "generator": {"n": n},
            })
            nash = solve_nash(g)
            traj = run_dynamics(cfg, g, nash, r)
            for player in traj.players:
                recs = traj.player_records(player)
                k0 = recs[0].kl_to_star
                for rec in recs:
                    bound = (1 - gamma) ** rec.t * k0 + 1e-9
                    worst = min(worst, float(np.min(bound - rec.kl_to_star)))
        return worst >= 0, f"min margin {worst:.2e} over {games} games x {steps} steps"
    return _timed(4, "expert contraction", 5, body)


def check_nash_oracle(games: int = 200) -> CriterionResult:
    def body():
        worst, brute_gap, brute_count = 0.0, 0.0, 0
        for r in range(games):
            gen = RngStream(3000 + r, 103).generator()
            n = int(gen.integers(3, 21))
            ctx = random_game(gen, n, KIND_CYCLE[r % 3])[0]
            sol = solve_nash(ctx, 1e-6)
            worst = max(worst, sol.exploitability)
            if n <= 4:
                brute_count += 1
                bf = brute_force_nash(ctx)
                brute_gap = max(brute_gap, abs(exploitability(ctx, sol.pi_star) - exploitability(ctx, bf.pi_star)))
        # n <= 4 is rare in 3..20, so a dedicated batch covers the comparison
        for r in range(games):
            gen = RngStream(4000 + r, 104).generator()
            ctx = random_game(gen, int(gen.integers(3, 5)), KIND_CYCLE[r % 3])[0]
            brute_count += 1
            sol, bf = solve_nash(ctx, 1e-6), brute_force_nash(ctx)
            brute_gap = max(brute_gap, abs(exploitability(ctx, sol.pi_star) - exploitability(ctx, bf.pi_star)))
        rps = solve_nash(rps_matrix(), 1e-6).pi_star
        rps_err = float(np.max(np.abs(rps - 1 / 3)))
        ok = worst <= 1e-6 and brute_gap <= 1e-4 and rps_err <= 1e-4
        return ok, (f"max exploitability {worst:.2e} (tol 1e-6); brute-force gap {brute_gap:.2e} on "
                    f"{brute_count} games (tol 1e-4); RPS error {rps_err:.2e}")
    return _timed(5, "Nash oracle", 120, body)


def check_gradients(points: int = 100, h: float = 1e-5, seed: int = 12) -> CriterionResult:
    def body():
        gen = RngStream(seed, 105).generator()
        worst = 0.0
        for mode in (SGD_LOSS_PAPER, SGD_LOSS_CORRECTED):
            for _ in range(points):
                n = int(gen.integers(2, 11))
                theta = gen.normal(size=n)
                opp = gen.dirichlet(np.ones(n))
                pref, rej = (int(v) for v in gen.choice(n, size=2, replace=False))
                grad = lana_loss_grad(theta, pref, rej, mode)
                fd = np.empty(n)
                for j in range(n):
                    e = np.zeros(n)
                    e[j] = h
                    fd[j] = (lana_loss(theta + e, opp, pref, rej, mode) - lana_loss(theta - e, opp, pref, rej, mode)) / (2 * h)
                rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), np.linalg.norm(fd))
                worst = max(worst, float(rel))
        return worst <= 1e-6, f"max relative error {worst:.2e} over {points} points per mode (tol 1e-6)"
    return _timed(6, "gradient correctness", 5, body)


def check_alignment_improvement(games: int = 20, steps: int = 2000, lr: float = 0.1) -> CriterionResult:
    def body():
        winrates, improved = [], 0
        for r in range(games):
            base = parse_config({
                "generator": {"seed": 5000 + r, "n": 5, "kind": "condorcet"},
                "judge": "ground_truth_deterministic", "T": steps, "lr": lr, "seeds": [r],
            })
            g = load_game(base)
            nash = solve_nash(g)
            sgd = run_dynamics(base.replace(update_mode=SGD_LOSS_CORRECTED), g, nash, r)
            for pl, init_pl in zip(sgd.final_policies, sgd.initial_policies):
                winrates.append(expected_winrate(g, pl, init_pl))
            exact = run_dynamics(base, g, nash, r)
            s = summarize(exact)
            init = np.mean([p["initial_exploitability"] for p in s["players"].values()])
            final = np.mean([p["final_exploitability"] for p in s["players"].values()])
            improved += final < init
        mean_wr = float(np.mean(winrates))
        ok = mean_wr >= 0.6 and improved >= 18
        return ok, f"corrected-SGD mean winrate vs pi_0 {mean_wr:.4f} (>= 0.6); exploitability reduced on {improved}/{games} seeds (>= 18)"
    return _timed(7, "alignment improvement", 120, body)


def check_dual_mode_audit(steps: int = 2000) -> CriterionResult:
    def body():
        import json

        with tempfile.TemporaryDirectory() as tmp:
            cfg = parse_config({
                "generator": {"seed": 7, "n": 5, "kind": "condorcet"},
                "T": steps, "seeds": [0, 1], "output_dir": tmp,
                "compare_modes": [SGD_LOSS_PAPER, SGD_LOSS_CORRECTED],
            })
            code, comparison = run_command(cfg)
            files_ok = all(
                (Path(tmp) / mode / f"seed_{s}.csv").is_file() for mode in cfg.compare_modes for s in cfg.seeds
            )
            on_disk = json.loads((Path(tmp) / "comparison.json").read_text())
            listed = all(
                "final_winrate_vs_init" in on_disk["results"][mode][str(s)]
                for mode in cfg.compare_modes for s in cfg.seeds
            )
            wr = {m: round(float(np.mean([v for s in comparison["results"][m].values()
                                           for v in s["final_winrate_vs_init"].values()])), 4)
                  for m in cfg.compare_modes}
        ok = code == 0 and files_ok and listed
        return ok, f"exit {code}; trajectories emitted: {files_ok}; comparison final winrates {wr}"
    return _timed(8, "dual-mode audit", 60, body)


def check_reproducibility(steps: int = 300) -> CriterionResult:
    def body():
        with tempfile.TemporaryDirectory() as tmp:
            doc = {"generator": {"seed": 3, "n": 6, "contexts": 2, "kind": "uniform"},
                   "judge": "ground_truth_sampled", "noise_epsilon": 0.05, "T": steps, "seeds": [0, 5]}
            blobs = []
            for rep in ("a", "b"):
                cfg = parse_config({**doc, "output_dir": str(Path(tmp) / rep)})
                run_command(cfg)
                blobs.append({p.name: p.read_bytes() for p in sorted(Path(cfg.output_dir).glob("*.csv"))})
        same = blobs[0] == blobs[1] and len(blobs[0]) == 2
        return same, f"{len(blobs[0])} CSVs byte-identical across reruns: {same}"
    return _timed(9, "reproducibility", None, body)


def check_config_game(cfg: RunConfig) -> CriterionResult:
    def body():
        try:
            g = load_game(cfg)
        except GameValidationError as e:
            return False, f"{len(e.violations)} violations: {e}"
        return not validate_game(g), f"{len(g.contexts)} context(s) valid"
    return _timed(0, "configured game validates", None, body)


def run_battery(cfg: RunConfig | None = None) -> list[CriterionResult]:
    results = []
    if cfg is not None:
        results.append(check_config_game(cfg))
    results.append(check_geometric_mixture())
    results.extend(check_lemma_and_horizon())
    results.append(check_expert_contraction())
    results.append(check_nash_oracle())
    results.append(check_gradients())
    results.append(check_alignment_improvement())
    results.append(check_dual_mode_audit())
    results.append(check_reproducibility())
    return results
