"""Exact top-k cosine similarity index over named embedding vectors.

Scans every stored vector on each query. The corpora here are schema
tables and entity labels, a few hundred items at most, so an exhaustive
numpy scan beats any approximate structure on both speed and simplicity.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyIndex, InvalidVector


@dataclass(frozen=True)
class RankedHit:
    id: str
    score: float


@dataclass
class IndexEntry:
    id: str
    vector: np.ndarray
    norm: float
    payload: str = ""


class VectorIndex:
    """In-memory exact-scan index. Upserting an existing id replaces its
    vector. Ordering is by descending score, ascending id on ties, so two
    runs over the same data always return the same ranking."""

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self._entries: dict[str, IndexEntry] = {}
        self._lock = threading.Lock()
        # Queries served; lets callers assert how many searches a pipeline
        # stage actually performed.
        self.query_count = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, id: str) -> bool:
        return id in self._entries

    def ids(self) -> list[str]:
        return sorted(self._entries)

    def upsert(self, id: str, values: list[float] | np.ndarray, payload: str = "") -> None:
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != self.dimension:
            raise DimensionMismatch(
                f"vector for {id!r} has shape {arr.shape}, index dimension is {self.dimension}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidVector(f"vector for {id!r} contains non-finite values")
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise InvalidVector(f"vector for {id!r} has zero magnitude")
        with self._lock:
            self._entries[id] = IndexEntry(id=id, vector=arr, norm=norm, payload=payload)

    def payload(self, id: str) -> str | None:
        entry = self._entries.get(id)
        return entry.payload if entry else None

    def remove(self, id: str) -> bool:
        with self._lock:
            return self._entries.pop(id, None) is not None

    def top_k(
        self,
        query: list[float] | np.ndarray,
        k: int,
        exclude: str | None = None,
    ) -> list[RankedHit]:
        """The k nearest entries by cosine similarity.

        ``exclude`` drops a single id from consideration, which is how a
        table avoids matching itself during relationship discovery.
        Returns min(k, size minus excluded) hits; k of zero is an empty
        answer, and only a genuinely empty index is an error.
        """
        if k < 0:
            raise ValueError("k must be >= 0")
        if k == 0:
            return []
        q = np.asarray(query, dtype=np.float64)
        if q.ndim != 1 or q.shape[0] != self.dimension:
            raise DimensionMismatch(
                f"query has shape {q.shape}, index dimension is {self.dimension}"
            )
        if not np.all(np.isfinite(q)):
            raise InvalidVector("query contains non-finite values")
        qnorm = float(np.linalg.norm(q))
        if qnorm == 0.0:
            raise InvalidVector("query has zero magnitude")

        with self._lock:
            if not self._entries:
                raise EmptyIndex("no entries to search")
            entries = [e for e in self._entries.values() if e.id != exclude]
            self.query_count += 1
        if not entries:
            return []

        # One dot product per entry rather than a batched matrix product:
        # the batched form lets the BLAS pick a summation order per row
        # position, so two identical vectors can score apart by one ulp
        # and dodge the id tie-break. Row-at-a-time dots depend only on
        # the vector's content. Corpora here are small, so no cost.
        scores = [float(e.vector @ q) / (e.norm * qnorm) for e in entries]
        # Guard against float drift pushing a score epsilon past the
        # mathematical bounds of cosine similarity.
        scores = [min(1.0, max(-1.0, s)) for s in scores]

        ranked = sorted(
            (RankedHit(id=e.id, score=s) for e, s in zip(entries, scores)),
            key=lambda h: (-h.score, h.id),
        )
        return ranked[:k]
