from npg_hpf.autodiff.nn import (
    GRUCell,
    GRUParams,
    Linear,
    Module,
    Parameter,
    gru_cell,
    uniform_init,
)
from npg_hpf.autodiff.optim import Adam, RMSprop, clip_grad_norm
from npg_hpf.autodiff.tensor import (
    DTYPE,
    Graph,
    GraphError,
    ShapeError,
    Tensor,
    op_tags,
)

__all__ = [
    "Adam",
    "DTYPE",
    "GRUCell",
    "GRUParams",
    "Graph",
    "GraphError",
    "Linear",
    "Module",
    "Parameter",
    "RMSprop",
    "ShapeError",
    "Tensor",
    "clip_grad_norm",
    "gru_cell",
    "op_tags",
    "uniform_init",
]
