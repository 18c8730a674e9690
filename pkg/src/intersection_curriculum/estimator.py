"""scikit-learn style front-end over the trainer and evaluator.

``fit`` trains from the simulator (there is no data to pass in), ``predict``
maps observation matrices to greedy actions.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .config import desk_profile
from .evaluation import EvalReport, run_eval
from .policy_net import actor_forward, encode_observation, softmax
from .ppo_trainer import train
from .validation import check_observations, check_scenarios


class CurriculumDrivingAgent(BaseEstimator):
    """Intersection-crossing policy trained under a curriculum scheduler.

    Parameters mirror the most-used run settings; anything else goes through
    ``overrides`` as dotted config keys (``{"reward.alpha1": 2.0}``).
    """

    def __init__(self, baseline="rd-acppo", n_sv_max=2, episodes=3000, init_weights="exp",
                 seed=0, overrides=None):
        self.baseline = baseline
        self.n_sv_max = n_sv_max
        self.episodes = episodes
        self.init_weights = init_weights
        self.seed = seed
        self.overrides = overrides

    def make_config(self):
        keys = {"trainer.baseline": self.baseline, "trainer.n_sv_max": self.n_sv_max,
                "trainer.episodes": self.episodes, "bandit.init": self.init_weights,
                "seed": self.seed}
        keys.update(self.overrides or {})
        return desk_profile(**keys).validate()

    def fit(self, X=None, y=None):
        if X is not None or y is not None:
            raise ValueError("fit takes no data; experience comes from the simulator")
        run = self.make_config()
        result = train(run)
        self.config_ = run
        self.params_ = result.params
        self.metrics_ = result.log
        self.bandit_ = result.bandit
        return self

    def _logits(self, X):
        check_is_fitted(self, "params_")
        obs = check_observations(X, self.n_sv_max)
        x = encode_observation(obs, self.config_.pos_scale, self.config_.speed_scale)
        return actor_forward(self.params_, x)

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self._logits(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self._logits(X), axis=1)

    def evaluate(self, n_sv_values=None, trials=200, seed=None) -> EvalReport:
        check_is_fitted(self, "params_")
        if n_sv_values is None:
            n_sv_values = range(self.n_sv_max + 1)
        vals = check_scenarios(n_sv_values, self.n_sv_max)
        return run_eval(self.params_, self.config_, vals, trials,
                        self.seed if seed is None else seed)

    def score(self, X=None, y=None) -> float:
        """Greedy success rate on the hardest scenario, 200 trials."""
        return self.evaluate([self.n_sv_max]).scenarios[self.n_sv_max].success_rate
