from kinforest.model.classifier import FamilyHeadParams, HeadParams, combine_features, family_id_head, kinship_head
from kinforest.model.fnn import (
    ForestParams, ForestState, GatedLayerParams, forest_forward, gate, gated_layer_forward, readout
)
from kinforest.model.fnn_model import FnnModel, ModelOutput
from kinforest.model.params import CENTER, ParameterSet, init_parameters, model_seed


__all__ = [
    "CENTER",
    "FamilyHeadParams",
    "FnnModel",
    "ForestParams",
    "ForestState",
    "GatedLayerParams",
    "HeadParams",
    "ModelOutput",
    "ParameterSet",
    "combine_features",
    "family_id_head",
    "forest_forward",
    "gate",
    "gated_layer_forward",
    "init_parameters",
    "kinship_head",
    "model_seed",
    "readout",
]
