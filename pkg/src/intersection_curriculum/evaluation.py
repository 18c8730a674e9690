"""Greedy-policy evaluation over scenario classes."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List

import numpy as np

from .config import RunConfig
from .mdp import Outcome
from .policy_net import ActorCriticParams
from .ppo_trainer import collect_episode, make_task

# straight, left, right for an ego entering from the south
EVAL_GOALS = ("N", "W", "E")
OUTCOMES = (Outcome.SUCCESS, Outcome.COLLISION, Outcome.TIMEOUT, Outcome.OFF_ROAD)


@dataclass
class ScenarioResult:
    n_sv: int
    trials: int
    counts: Dict[str, int]
    mean_t_c: float

    def rate(self, outcome: Outcome) -> float:
        return self.counts.get(outcome.value, 0) / self.trials

    @property
    def success_rate(self) -> float:
        return self.rate(Outcome.SUCCESS)

    @property
    def collision_rate(self) -> float:
        return self.rate(Outcome.COLLISION)

    @property
    def timeout_rate(self) -> float:
        return self.rate(Outcome.TIMEOUT)

    @property
    def off_road_rate(self) -> float:
        return self.rate(Outcome.OFF_ROAD)


@dataclass
class EvalReport:
    scenarios: Dict[int, ScenarioResult] = field(default_factory=dict)

    def __getitem__(self, n_sv: int) -> ScenarioResult:
        return self.scenarios[n_sv]

    HEADER = ("n_sv", "trials", "success", "collision", "timeout", "off_road", "mean_t_c")

    def rows(self) -> List[tuple]:
        return [(n, s.trials, s.success_rate, s.collision_rate, s.timeout_rate,
                 s.off_road_rate, s.mean_t_c) for n, s in sorted(self.scenarios.items())]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            w.writerows(self.rows())

    def format_table(self) -> str:
        lines = ["n_sv  trials  succ(%)  coll(%)  timeout(%)  offroad(%)  mean_t_c"]
        for n, trials, su, co, to, of, tc in self.rows():
            lines.append(f"{n:>4}  {trials:>6}  {100 * su:7.1f}  {100 * co:7.1f}  "
                         f"{100 * to:10.1f}  {100 * of:10.1f}  {tc:8.2f}")
        return "\n".join(lines)


def trial_rng(seed: int, n_sv: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, n_sv, trial])


def run_eval(params: ActorCriticParams, run: RunConfig, n_sv_values: Iterable[int],
             trials: int, seed: int = 0) -> EvalReport:
    """Greedy rollouts, ``trials`` per scenario, goals cycled straight/left/right.

    Each trial draws from its own generator keyed by ``(seed, n_sv, trial)``,
    so results do not depend on trial order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    task = make_task(run)
    report = EvalReport()
    for n_sv in n_sv_values:
        if not 0 <= n_sv <= run.trainer.n_sv_max:
            raise ValueError(f"n_sv={n_sv} outside the trained range")
        counts = {o.value: 0 for o in OUTCOMES}
        t_success = []
        for k in range(trials):
            buf = collect_episode(task, params, n_sv, trial_rng(seed, n_sv, k), run.pos_scale,
                                  run.speed_scale, greedy=True, goal=EVAL_GOALS[k % 3])
            counts[buf.outcome.value] += 1
            if buf.outcome is Outcome.SUCCESS:
                t_success.append(buf.t_c)
        mean_tc = float(np.mean(t_success)) if t_success else math.nan
        report.scenarios[n_sv] = ScenarioResult(n_sv, trials, counts, mean_tc)
    return report
