from app.decoder.descriptor import describe_state, parse_causal, parse_state
from app.decoder.mapper import (
    AssignmentResult,
    CausalMapper,
    VariableSpec,
    fit_causal_mapper,
    fit_causal_predictors,
    fit_target_assignment,
    map_latents,
    variable_specs,
)

__all__ = [
    'describe_state', 'parse_causal', 'parse_state',
    'AssignmentResult', 'CausalMapper', 'VariableSpec', 'fit_causal_mapper',
    'fit_causal_predictors', 'fit_target_assignment', 'map_latents', 'variable_specs',
]
