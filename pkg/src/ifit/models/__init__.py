"""Benchmark models and synthetic-dataset factories."""

import numpy as np

from .enzyme import EnzymeModel, gillespie_ssa
from .logit import LogitModel, logit_mle
from .toad import ToadModel, load_toad_csv, toad_summary, write_toad_csv
from .trait import TraitModel

MODEL_NAMES = ("logit", "enzyme", "trait", "toad")


def make_dataset(name, rng: np.random.Generator):
    """A fresh model instance and an observed summary drawn at its true parameters.

    For the logit model the covariates are drawn first (from the same
    generator) and frozen in the returned model.
    """
    if name == "logit":
        model = LogitModel.random(rng)
    elif name == "enzyme":
        model = EnzymeModel()
    elif name == "trait":
        model = TraitModel()
    elif name == "toad":
        model = ToadModel()
    else:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    t_obs = model.simulate(model.theta_true, rng)
    return model, t_obs


__all__ = [
    "MODEL_NAMES", "make_dataset", "LogitModel", "logit_mle", "EnzymeModel", "gillespie_ssa",
    "TraitModel", "ToadModel", "toad_summary", "load_toad_csv", "write_toad_csv",
]
