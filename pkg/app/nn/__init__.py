"""Numerical core: tape autodiff, layers, flows, gates, optimizer, checkpoints"""
from app.nn.checkpoint import load_checkpoint, save_checkpoint
from app.nn.flows import (
    AffineCoupling,
    CouplingFlow,
    InvertibleLinear,
    alternating_mask,
    flow_forward,
    flow_inverse,
)
from app.nn.gates import st_gate
from app.nn.gradcheck import grad_check, grad_check_params
from app.nn.layers import Linear, Mlp, Module, mlp_apply
from app.nn.losses import gaussian_nll
from app.nn.optim import Adam, OptimizerState, ParamGroup, optimizer_step
from app.nn.tensor import Tensor, as_tensor, concat, einsum, parameter, take, zeros

__all__ = [
    "Tensor",
    "as_tensor",
    "concat",
    "einsum",
    "parameter",
    "take",
    "zeros",
    "Module",
    "Linear",
    "Mlp",
    "mlp_apply",
    "AffineCoupling",
    "InvertibleLinear",
    "CouplingFlow",
    "alternating_mask",
    "flow_forward",
    "flow_inverse",
    "st_gate",
    "gaussian_nll",
    "Adam",
    "OptimizerState",
    "ParamGroup",
    "optimizer_step",
    "grad_check",
    "grad_check_params",
    "save_checkpoint",
    "load_checkpoint",
]
