import logging

from dataclasses import dataclass
from typing import Any, List

import numpy as np

from scipy import special

from kinforest.autodiff import Tensor, no_grad
from kinforest.model.classifier import FamilyHeadParams, HeadParams, combine_features, family_id_head, kinship_head
from kinforest.model.fnn import ForestParams, forest_forward, readout
from kinforest.model.params import CENTER, ParameterSet, init_parameters, model_seed
from kinforest.run_config import RunConfig


logger = logging.getLogger(__name__)


@dataclass
class ModelOutput:
    logit: Tensor                 # (N,)
    F_parent: Tensor              # (N, L·d_h)
    F_child: Tensor               # (N, L·d_h)
    H: Tensor                     # (N, h2)
    family_parent: List[Tensor]   # M × (N, n_families); empty without a family head
    family_child: List[Tensor]


@dataclass
class FnnModel:
    """Forest network, kinship head, family-ID head and class centers."""

    cfg: RunConfig
    d_in: int
    n_families: int
    params: ParameterSet

    @classmethod
    def initialize(cls, cfg: RunConfig, d_in: int, n_families: int, seed: int, fold: int = 0, member: int = 0) -> "FnnModel":
        rng = np.random.default_rng(model_seed(seed, fold, member))
        params = init_parameters(cfg, d_in, n_families, rng)
        logger.debug("initialized %d parameters in %d tensors (seed=%d, fold=%d)", params.count(), len(params), seed, fold)
        return cls(cfg=cfg, d_in=d_in, n_families=n_families, params=params)

    @property
    def centers(self) -> Tensor: return self.params[CENTER]

    def forest_params(self) -> ForestParams: return ForestParams.from_parameters(self.params, self.cfg.layers)
    def head_params(self) -> HeadParams: return HeadParams.from_parameters(self.params)
    def family_params(self) -> FamilyHeadParams | None: return FamilyHeadParams.from_parameters(self.params, self.cfg.parts)

    def forward(self, x_parent: Any, x_child: Any, with_family: bool = True) -> ModelOutput:
        state = forest_forward(x_parent, x_child, self.forest_params())
        F_p, F_c = readout(state)
        logit, H = kinship_head(combine_features(F_p, F_c), self.head_params())

        family = self.family_params() if with_family else None
        fam_p = family_id_head(F_p, family, self.cfg.parts) if family is not None else []
        fam_c = family_id_head(F_c, family, self.cfg.parts) if family is not None else []
        return ModelOutput(logit=logit, F_parent=F_p, F_child=F_c, H=H, family_parent=fam_p, family_child=fam_c)

    def scores(self, x_parent: Any, x_child: Any) -> np.ndarray:
        """σ(logit) per pair, computed without recording a graph."""
        with no_grad():
            logit = self.forward(x_parent, x_child, with_family=False).logit
        return special.expit(logit.value)
