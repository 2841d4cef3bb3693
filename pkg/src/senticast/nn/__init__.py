from .autograd import Parameter, Tensor, concat, no_grad, zero_grads
from .blocks import (
    GatedResidualNetwork,
    LstmCell,
    LstmEncoder,
    MultiHeadAttention,
    VariableSelection,
    causal_mask,
    lstm_step,
    variable_selection,
)
from .gradcheck import GradCheckReport, gradcheck
from .layers import LayerNorm, Linear, RMSNorm, SwigluFF, dropout, rmsnorm, swiglu_ff
from .optim import adam_step

__all__ = [
    "GatedResidualNetwork",
    "GradCheckReport",
    "LayerNorm",
    "Linear",
    "LstmCell",
    "LstmEncoder",
    "MultiHeadAttention",
    "Parameter",
    "RMSNorm",
    "SwigluFF",
    "Tensor",
    "VariableSelection",
    "adam_step",
    "causal_mask",
    "concat",
    "dropout",
    "gradcheck",
    "lstm_step",
    "no_grad",
    "rmsnorm",
    "swiglu_ff",
    "variable_selection",
    "zero_grads",
]
