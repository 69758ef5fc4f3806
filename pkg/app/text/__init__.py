from app.env.colors import PALETTE, color_name
from app.text.grammar import (
    NOOP_CANONICAL,
    NOOP_SENTENCE,
    Pcfg,
    canonical_describe,
    describe_action,
    target_color,
    target_kind,
)
from app.text.tokenizer import (
    DEFAULT_PADDING_LENGTH,
    HASH_BUCKETS,
    PAD_ID,
    TokenSeq,
    Vocabulary,
    normalize,
    tokenize_pad,
)
from app.text.parser import parse_action
from app.text.coordinates import NOOP_COORDINATES, action_coordinates

__all__ = [
    'PALETTE', 'color_name',
    'NOOP_CANONICAL', 'NOOP_SENTENCE', 'Pcfg', 'canonical_describe', 'describe_action',
    'target_color', 'target_kind',
    'DEFAULT_PADDING_LENGTH', 'HASH_BUCKETS', 'PAD_ID', 'TokenSeq', 'Vocabulary', 'normalize',
    'tokenize_pad',
    'parse_action',
    'NOOP_COORDINATES', 'action_coordinates',
]
