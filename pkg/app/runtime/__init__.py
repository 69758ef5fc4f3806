"""World-model runtime: learned and oracle models, checkpoints, stdio protocol"""
from app.runtime.world_model import (
    CausalWorldModel,
    LatentState,
    OracleWorldModel,
    RolloutStep,
    SamplingMode,
    WorldModel,
)
from app.runtime.checkpoint import load_model_parts, load_world_model, save_world_model
from app.runtime.service import (
    DescribeRequest,
    EncodeRequest,
    ErrorResponse,
    LatentResponse,
    RuntimeService,
    StepRequest,
    StepResponse,
    serve_stdio,
)

__all__ = [
    'CausalWorldModel', 'LatentState', 'OracleWorldModel', 'RolloutStep', 'SamplingMode', 'WorldModel',
    'load_model_parts', 'load_world_model', 'save_world_model',
    'DescribeRequest', 'EncodeRequest', 'ErrorResponse', 'LatentResponse', 'RuntimeService',
    'StepRequest', 'StepResponse', 'serve_stdio',
]
