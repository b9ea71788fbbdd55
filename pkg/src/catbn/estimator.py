"""sklearn-style estimator facade over the model zoo and EM fitting.

``CatModel`` follows the usual contract: constructor stores
hyperparameters verbatim (so ``get_params``/``set_params``/cloning work),
``fit`` learns CPTs and exposes trailing-underscore attributes, and
``transform`` produces per-row skill posteriors that compose with any
downstream sklearn pipeline step.  Input X is a Dataset or a DataFrame
in the blueprint's schema; the estimator is intentionally not a generic
numeric-matrix estimator, so the sklearn ``check_estimator`` battery is
out of scope.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import training_observations
from .inference import joint_posterior, row_log_likelihoods
from .learning import EmConfig, em_fit
from .session import TerminationRule, TestSession
from .validation import ensure_dataset
from .zoo import TestBlueprint, build_model, spec_by_id


class CatModel(TransformerMixin, BaseEstimator):
    """Adaptive-test student model with a fit/transform/predict surface.

    Parameters
    ----------
    model : str
        Catalogue id of the structure to fit (b2, b3+, n3o, b2e, ...).
    blueprint : TestBlueprint
        The concrete test the structure is instantiated over.
    max_iterations, ll_tolerance, pseudocount, seed
        EM configuration; see EmConfig.
    """

    def __init__(
        self,
        model: str = "b3",
        blueprint: TestBlueprint | None = None,
        max_iterations: int = 100,
        ll_tolerance: float = 1e-4,
        pseudocount: float = 0.0,
        seed: int = 0,
    ):
        self.model = model
        self.blueprint = blueprint
        self.max_iterations = max_iterations
        self.ll_tolerance = ll_tolerance
        self.pseudocount = pseudocount
        self.seed = seed

    def _spec(self):
        return spec_by_id(self.model)

    def _em_config(self) -> EmConfig:
        return EmConfig(
            max_iterations=self.max_iterations,
            ll_tolerance=self.ll_tolerance,
            pseudocount=self.pseudocount,
            seed=self.seed,
        )

    def fit(self, X, y=None) -> "CatModel":
        """Learn CPTs from answer records; skills stay latent.

        Observed-score variants additionally observe the discretized
        total-score group during fitting.
        """
        spec = self._spec()
        if self.blueprint is None:
            raise ValueError("CatModel needs a blueprint")
        ds = ensure_dataset(X, self.blueprint, spec.scale)
        structure = build_model(spec, self.blueprint)
        obs = training_observations(ds, spec.observed_score, structure)
        result = em_fit(structure, obs, self._em_config())
        self.network_ = result.network
        self.ll_trace_ = list(result.ll_trace)
        self.n_iter_ = result.iterations_used
        self.converged_ = result.converged
        self.target_ids_ = self.network_.skill_ids
        return self

    # -- posterior views ------------------------------------------------------

    def _row_posteriors(self, ds) -> list[list[np.ndarray]]:
        net = self.network_
        out = []
        for evidence in ds.evidence_rows(net):
            row = []
            for t in self.target_ids_:
                row.append(joint_posterior(net, evidence, (t,)).table)
            out.append(row)
        return out

    def transform(self, X) -> np.ndarray:
        """Per-row posterior over every skill state, columns in
        ``get_feature_names_out()`` order."""
        check_is_fitted(self, "network_")
        ds = ensure_dataset(X, self.blueprint, self._spec().scale)
        rows = self._row_posteriors(ds)
        return np.array([np.concatenate(row) for row in rows])

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        check_is_fitted(self, "network_")
        names = []
        for t in self.target_ids_:
            for label in self.network_.var(t).state_labels:
                names.append(f"{t}={label}")
        return np.asarray(names, dtype=object)

    def predict(self, X) -> np.ndarray:
        """Most probable skill state per row: shape (n,) for a single
        target, (n, n_targets) otherwise; 0-based state indices."""
        check_is_fitted(self, "network_")
        ds = ensure_dataset(X, self.blueprint, self._spec().scale)
        rows = self._row_posteriors(ds)
        states = np.array([[int(np.argmax(p)) for p in row] for row in rows])
        return states[:, 0] if len(self.target_ids_) == 1 else states

    def score(self, X, y=None) -> float:
        """Mean per-row log-likelihood of the observed cells."""
        check_is_fitted(self, "network_")
        ds = ensure_dataset(X, self.blueprint, self._spec().scale)
        lls = row_log_likelihoods(self.network_, list(ds.evidence_rows(self.network_)))
        return float(lls.mean())

    # -- adaptive testing -------------------------------------------------------

    def start_session(
        self,
        info_evidence=None,
        rule: TerminationRule = TerminationRule.exhaust(),
    ) -> TestSession:
        """Open an adaptive test against the fitted network."""
        check_is_fitted(self, "network_")
        return TestSession(self.network_, info_evidence or {}, rule=rule)
