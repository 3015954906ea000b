"""Example-based chat responder with a similarity gate.

Prompts are embedded as idf-weighted bags of words, L2-normalized; a query
answers with the response of the nearest prompt iff the cosine similarity is
strictly above the threshold. The embedding sits behind build_index so a
learned encoder can replace it without touching callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .nlu import tokenize

DEFAULT_THRESHOLD = 0.8


class ChatbotError(Exception):
    pass


class EmptyDatabase(ChatbotError):
    pass


class PairFileError(ChatbotError):
    pass


@dataclass(frozen=True)
class ExamplePair:
    prompt: str
    response: str
    tags: tuple[str, ...] = ()


@dataclass
class EmbeddingIndex:
    vocabulary: dict[str, int]
    vectors: np.ndarray  # rows unit L2 norm, aligned with pairs
    pairs: list[ExamplePair]
    idf: dict[str, float] = field(default_factory=dict)


def build_index(pairs: list[ExamplePair]) -> EmbeddingIndex:
    """Index prompts as idf-weighted bag-of-words rows.

    idf(t) = 1 + ln(N / df(t)); the +1 keeps tokens that appear in every
    prompt at positive weight, and the N/df ratio makes scores invariant
    under duplicating the whole pair set.
    """
    if not pairs:
        raise EmptyDatabase("cannot index zero pairs")
    token_bags = [[t for t, _, _ in tokenize(p.prompt)] for p in pairs]
    for pair, bag in zip(pairs, token_bags):
        if not bag:
            raise ChatbotError(f"prompt has no indexable tokens: {pair.prompt!r}")
    df: dict[str, int] = {}
    for bag in token_bags:
        for token in set(bag):
            df[token] = df.get(token, 0) + 1
    vocabulary = {token: dim for dim, token in enumerate(sorted(df))}
    n = len(pairs)
    idf = {token: 1.0 + math.log(n / count) for token, count in df.items()}

    vectors = np.zeros((n, max(len(vocabulary), 1)), dtype=np.float64)
    for row, bag in enumerate(token_bags):
        for token in bag:
            vectors[row, vocabulary[token]] += idf[token]
        vectors[row] /= np.linalg.norm(vectors[row])
    return EmbeddingIndex(vocabulary=vocabulary, vectors=vectors, pairs=list(pairs), idf=idf)


def embed(index: EmbeddingIndex, utterance: str) -> np.ndarray:
    """Query-side embedding; tokens outside the index vocabulary are dropped."""
    vector = np.zeros(index.vectors.shape[1], dtype=np.float64)
    for token, _, _ in tokenize(utterance):
        dim = index.vocabulary.get(token)
        if dim is not None:
            vector[dim] += index.idf[token]
    norm = np.linalg.norm(vector)
    if norm > 0:
        vector /= norm
    return vector


def respond(
    index: EmbeddingIndex, utterance: str, threshold: float = DEFAULT_THRESHOLD
) -> Optional[tuple[str, float]]:
    """Best response and its score iff score is strictly above threshold.

    Ties go to the lowest row index.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ChatbotError(f"threshold must be in [0, 1], got {threshold}")
    query = embed(index, utterance)
    scores = index.vectors @ query
    row = int(np.argmax(scores))
    score = float(scores[row])
    if score > threshold:
        return index.pairs[row].response, score
    return None


def best_score(index: EmbeddingIndex, utterance: str) -> tuple[int, float]:
    """Row index and score of the nearest prompt, gate not applied."""
    scores = index.vectors @ embed(index, utterance)
    row = int(np.argmax(scores))
    return row, float(scores[row])


def load_pairs(*paths: str | Path) -> list[ExamplePair]:
    """Read tab-separated `prompt<TAB>response` files, merged in order."""
    pairs: list[ExamplePair] = []
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise PairFileError(f"pair file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                prompt, sep, response = line.partition("\t")
                if not sep or not prompt.strip() or not response.strip():
                    raise PairFileError(f"{path}:{lineno}: expected `prompt<TAB>response`")
                pairs.append(ExamplePair(prompt.strip(), response.strip()))
    return pairs
