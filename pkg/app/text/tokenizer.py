import hashlib
import re
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List

import numpy as np

from app.errors import DataError

PAD_ID = 0
HASH_BUCKETS = 1024
DEFAULT_PADDING_LENGTH = 32

_PUNCT = re.compile(r"[^a-z0-9\s]")


def normalize(text: str) -> List[str]:
    """Lowercase, strip punctuation, split on whitespace"""
    return _PUNCT.sub(" ", text.lower()).split()


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple
    attention_len: int

    def __len__(self) -> int:
        return len(self.ids)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.ids, dtype=np.int64)


class Vocabulary:
    """
    Word -> id table

    Known words get ids 1..V in list order; anything else is hashed into one
    of HASH_BUCKETS extra ids after the known range. Id 0 is padding.
    """

    def __init__(self, words: Iterable[str], buckets: int = HASH_BUCKETS):
        self.words: List[str] = list(dict.fromkeys(words))
        self.buckets = buckets
        self._index: Dict[str, int] = {w: i + 1 for i, w in enumerate(self.words)}

    @property
    def size(self) -> int:
        """Number of distinct ids including padding"""
        return 1 + len(self.words) + self.buckets

    def token_id(self, token: str) -> int:
        known = self._index.get(token)
        if known is not None:
            return known
        return 1 + len(self.words) + zlib.crc32(token.encode("utf-8")) % self.buckets

    def content_hash(self) -> str:
        payload = "\n".join(self.words) + f"\n#buckets={self.buckets}"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.words) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, buckets: int = HASH_BUCKETS) -> "Vocabulary":
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except FileNotFoundError:
            raise DataError(f"vocabulary file not found: {path}")
        return cls([line.strip() for line in lines if line.strip()], buckets)

    @classmethod
    def from_grammar(cls, pcfg) -> "Vocabulary":
        return cls(pcfg.words())


def tokenize_pad(text: str, vocabulary: Vocabulary, length: int = DEFAULT_PADDING_LENGTH) -> TokenSeq:
    """
    Tokenize and pad/truncate to exactly ``length`` ids

    Args:
        text: Free-form action text
        vocabulary: Word table
        length: Padding length l (>= 1)

    Returns:
        TokenSeq with len == length
    """
    if length < 1:
        raise ValueError(f"padding length must be >= 1, got {length}")
    ids = [vocabulary.token_id(t) for t in normalize(text)][:length]
    attention_len = len(ids)
    ids.extend([PAD_ID] * (length - attention_len))
    return TokenSeq(tuple(ids), attention_len)
