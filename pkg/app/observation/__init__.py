from app.observation.mixing import (
    SINGULAR_VALUE_MARGIN,
    ObservationMap,
    encode,
    make_mixing,
    observe,
)

__all__ = ['SINGULAR_VALUE_MARGIN', 'ObservationMap', 'encode', 'make_mixing', 'observe']
