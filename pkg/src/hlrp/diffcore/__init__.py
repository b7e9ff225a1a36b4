from hlrp.diffcore.adam import Adam
from hlrp.diffcore.jet import (
    Jet,
    Mode,
    affine_jet,
    lowrank_jet,
    relu_jet,
    seed_jet,
    tanh_jet,
    vector_jet,
)
from hlrp.diffcore.linalg import orthonormal_columns, svd
from hlrp.diffcore.rng import make_rng, rng_from_state, rng_state
from hlrp.diffcore.tape import ParamStore, Tape, param_grad

__all__ = [
    "Adam",
    "Jet",
    "Mode",
    "ParamStore",
    "Tape",
    "affine_jet",
    "lowrank_jet",
    "make_rng",
    "orthonormal_columns",
    "param_grad",
    "relu_jet",
    "rng_from_state",
    "rng_state",
    "seed_jet",
    "svd",
    "tanh_jet",
    "vector_jet",
]
