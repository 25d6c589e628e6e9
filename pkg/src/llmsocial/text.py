"""Text encoders, token normalisation and the similarity measures.

Two families of similarity live here: cosine similarity between dense
encodings (agent-to-agent and backstory-to-post "contextual" similarity)
and the lexicon-based Jaccard / precision similarities between
normalised token sets.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .adapters import env_transport
from .errors import DimensionMismatch, EmptyPost, NoPosts

logger = logging.getLogger(__name__)

_NON_WORD = re.compile(r"[\W_]+", re.UNICODE)


def load_word_list(path=None, bundled: str = "stopwords.txt") -> frozenset[str]:
    """One token per line, UTF-8, lowercased.  ``None`` loads a bundled list."""
    if path is None:
        text = resources.files("llmsocial").joinpath("data", bundled).read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def load_stopwords(path=None) -> frozenset[str]:
    return load_word_list(path, "stopwords.txt")


DEFAULT_STOPWORDS = load_stopwords()


def tokenize(text: str, stopwords: Iterable[str] = DEFAULT_STOPWORDS) -> list[str]:
    """Lowercase, split on anything that is not a letter or digit, drop stopwords."""
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [t for t in _NON_WORD.split(text.lower()) if t and t not in stop]


# ---------------------------------------------------------------------------
# Stemmer

_VOWEL = re.compile(r"[aeiouy]")


def _undouble(stem: str) -> str:
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in "lsz" and stem[-1].isalpha():
        return stem[:-1]
    return stem


def _stem_once(w: str) -> str:
    if len(w) <= 3 or not w.isalpha():
        return w
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    for suffix in ("ing", "ed"):
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if len(stem) >= 3 and _VOWEL.search(stem):
                return _undouble(stem)
            return w
    if w.endswith("ly") and len(w) >= 5:
        return w[:-2]
    if w.endswith("s") and not w.endswith(("ss", "us", "is")):
        return w[:-1]
    return w


def suffix_stemmer(word: str) -> str:
    """Strip common English inflections until nothing changes.

    Iterating to a fixpoint makes the stemmer idempotent:
    ``suffix_stemmer(suffix_stemmer(w)) == suffix_stemmer(w)``.
    """
    prev = None
    while word != prev:
        prev, word = word, _stem_once(word)
    return word


def preprocess(
    text: str,
    stopword_list: Iterable[str] = DEFAULT_STOPWORDS,
    stemmer: Callable[[str], str] = suffix_stemmer,
) -> frozenset[str]:
    """Normalised token set: lowercase, strip punctuation, drop stopwords, stem.

    Stopwords are removed both before and after stemming so the result is
    a fixpoint of ``preprocess(" ".join(result))``.
    """
    stop = stopword_list if isinstance(stopword_list, (set, frozenset)) else frozenset(stopword_list)
    out = set()
    for tok in tokenize(text, stop):
        s = stemmer(tok)
        if s and s not in stop:
            out.add(s)
    return frozenset(out)


def jaccard_sim(b: Iterable[str], p: Iterable[str]) -> float:
    b, p = set(b), set(p)
    union = b | p
    if not union:
        logger.warning("jaccard_sim called with two empty token sets; returning 0")
        return 0.0
    return len(b & p) / len(union)


def precision_sim(b: Iterable[str], p: Iterable[str]) -> float:
    """Share of the post's tokens that also occur in the backstory."""
    b, p = set(b), set(p)
    if not p:
        raise EmptyPost("precision similarity needs at least one post token")
    return len(b & p) / len(p)


# ---------------------------------------------------------------------------
# Encoders

class EncoderPort(Protocol):
    def encode(self, text: str) -> np.ndarray: ...

    def dim(self) -> int: ...


class HashedBowEncoder:
    """Bag of words hashed into ``D`` buckets, L2-normalised.

    Buckets come from keyed BLAKE2b so they are stable across processes and
    platforms (Python's ``hash`` is salted per process).
    """

    def __init__(self, D: int = 256, seed: int = 0, stopwords: Iterable[str] = DEFAULT_STOPWORDS):
        if D < 2:
            raise ValueError("D must be >= 2")
        self.D = D
        self.seed = seed
        self.stopwords = frozenset(stopwords)
        self._key = str(seed).encode()
        self._buckets: dict[str, int] = {}
        self._cache: dict[str, np.ndarray] = {}

    def dim(self) -> int:
        return self.D

    def bucket(self, token: str) -> int:
        b = self._buckets.get(token)
        if b is None:
            h = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key)
            b = self._buckets[token] = int.from_bytes(h.digest(), "big") % self.D
        return b

    def encode(self, text: str) -> np.ndarray:
        v = self._cache.get(text)
        if v is None:
            v = np.zeros(self.D)
            for tok in tokenize(text, self.stopwords):
                v[self.bucket(tok)] += 1.0
            n = np.linalg.norm(v)
            if n > 0:
                v /= n
            v.flags.writeable = False
            if len(self._cache) < 200_000:
                self._cache[text] = v
        return v


def hashed_bow_encoder(D: int = 256, seed: int = 0) -> HashedBowEncoder:
    return HashedBowEncoder(D, seed)


class RemoteEncoder:
    """Batch encoder backed by an HTTP service, cached on disk by content hash.

    ``transport`` receives ``{"texts": [...]}`` and must return
    ``{"vectors": [[...], ...]}``; the default posts JSON to ``url``.
    """

    def __init__(self, url: str | None = None, D: int = 384, cache_path=None,
                 transport: Callable[[dict], dict] | None = None, batch_size: int = 32,
                 token_env: str = "LLMSOCIAL_ENCODER_TOKEN"):
        self.url = url
        self.D = D
        self.cache_path = cache_path
        self.batch_size = batch_size
        self.transport = transport or _http_transport(url, token_env)
        self._cache: dict[str, np.ndarray] = {}
        if cache_path and os.path.exists(cache_path):
            with open(cache_path, encoding="utf-8") as fh:
                for line in fh:
                    rec = json.loads(line)
                    self._cache[rec["key"]] = np.asarray(rec["vector"], dtype=float)

    def dim(self) -> int:
        return self.D

    def encode_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        keys = [content_hash(t) for t in texts]
        todo = sorted({k: t for k, t in zip(keys, texts) if k not in self._cache}.items())
        for i in range(0, len(todo), self.batch_size):
            chunk = todo[i: i + self.batch_size]
            resp = self.transport({"texts": [t for _, t in chunk]})
            vectors = resp["vectors"]
            if len(vectors) != len(chunk):
                raise DimensionMismatch("encoder returned a different number of vectors")
            new = []
            for (k, _), vec in zip(chunk, vectors):
                arr = np.asarray(vec, dtype=float)
                if arr.shape != (self.D,):
                    raise DimensionMismatch(f"expected dimension {self.D}, got {arr.shape}")
                self._cache[k] = arr
                new.append({"key": k, "vector": arr.tolist()})
            if self.cache_path:
                with open(self.cache_path, "a", encoding="utf-8") as fh:
                    for rec in new:
                        fh.write(json.dumps(rec) + "\n")
        return [self._cache[k] for k in keys]

    def encode(self, text: str) -> np.ndarray:
        return self.encode_many([text])[0]


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _http_transport(url, token_env):
    def post(body: dict) -> dict:
        if url is None:
            raise RuntimeError("no endpoint configured for remote encoder")
        return env_transport(url, token_env)(body)

    return post


# ---------------------------------------------------------------------------
# Similarities and agent encodings

def cosine_sim(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def cosine_matrix(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Pairwise cosine similarities between rows; zero rows give 0."""
    def unit(m):
        m = np.asarray(m, dtype=float)
        n = np.linalg.norm(m, axis=1, keepdims=True)
        return np.divide(m, n, out=np.zeros_like(m), where=n > 0)

    ua = unit(a)
    ub = ua if b is None else unit(b)
    return np.clip(ua @ ub.T, -1.0, 1.0)


@dataclass(frozen=True)
class AgentEncoding:
    agent_id: str
    vector: np.ndarray
    n_posts: int


def agent_encoding(posts, enc: EncoderPort, agent_id: str | None = None) -> AgentEncoding:
    """Mean of the post encodings (accepts PostRecords or raw strings)."""
    posts = list(posts)
    if not posts:
        raise NoPosts("agent_encoding needs at least one post")
    texts = [p if isinstance(p, str) else p.text for p in posts]
    if agent_id is None and not isinstance(posts[0], str):
        agent_id = posts[0].author_id
    vec = np.mean([enc.encode(t) for t in texts], axis=0)
    return AgentEncoding(agent_id or "", vec, len(texts))
