"""Daily textual feature groups.

Counts, keyword frequencies and lexicon sentiment are computed from a
JSON-lines corpus. Topic distributions and word embeddings come from
external tools and are loaded and validated from CSV.
"""
from __future__ import annotations

import csv
import json
import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from newsload.errors import DimensionMismatch, ParseError, SimplexViolation

GROUPS = ("count", "wordfreq", "sentiment", "topic", "embedding")
DOC_FIELDS = ("title", "description", "body")
SENTIMENT_DIMS = (
    "polarity_mean",
    "polarity_min",
    "polarity_max",
    "subjectivity_mean",
    "subjectivity_min",
)
COUNT_DIMS = ("n_docs", "n_tokens", "mean_tokens")

# letters/digits, joined by internal hyphens or apostrophes
_TOKEN = re.compile(r"[^\W_]+(?:[-'][^\W_]+)*", re.UNICODE)


@dataclass
class DailyCorpus:
    date: np.datetime64
    documents: list = field(default_factory=list)


@dataclass
class TextFeatureTable:
    group: str
    dates: np.ndarray
    values: np.ndarray
    dim_names: list

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.dates), len(self.dim_names))

    def column(self, dim):
        return self.values[:, self.dim_names.index(dim)]


@dataclass
class Lexicon:
    weights: dict
    negations: frozenset = frozenset({"not", "no", "never", "without", "nor"})

    def __post_init__(self):
        for w, (pol, subj) in self.weights.items():
            if not (-1.0 <= pol <= 1.0 and 0.0 <= subj <= 1.0):
                raise ValueError(f"lexicon weight out of range for {w!r}")

    def flipped(self):
        """Same lexicon with every polarity negated."""
        return Lexicon({w: (-p, s) for w, (p, s) in self.weights.items()}, self.negations)

    @classmethod
    def from_csv(cls, path, negations=None):
        weights = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                weights[row["word"].strip().lower()] = (float(row["polarity"]), float(row["subjectivity"]))
        lex = cls(weights)
        if negations is not None:
            lex.negations = frozenset(negations)
        return lex

    @classmethod
    def default(cls):
        data = resources.files("newsload") / "data"
        with resources.as_file(data / "lexicon.csv") as p:
            lex = cls.from_csv(p)
        neg = (data / "negations.txt").read_text(encoding="utf-8").split()
        lex.negations = frozenset(neg)
        return lex


def tokenize(document: str) -> list:
    return _TOKEN.findall(document.lower())


def count_features(corpus: DailyCorpus):
    """(documents, tokens, mean tokens per document) for one day."""
    lengths = [len(tokenize(d)) for d in corpus.documents]
    n = len(lengths)
    total = sum(lengths)
    return np.array([n, total, total / n if n else 0.0], dtype=float)


def keyword_frequencies(corpus: DailyCorpus, keywords):
    if not keywords:
        raise ValueError("keywords must be non-empty")
    counts = Counter()
    total = 0
    for doc in corpus.documents:
        toks = tokenize(doc)
        total += len(toks)
        counts.update(toks)
    if total == 0:
        return np.zeros(len(keywords))
    return np.array([counts[k.lower()] / total for k in keywords], dtype=float)


def document_sentiment(document, lexicon):
    """Polarity and subjectivity of one document.

    Polarity is the mean weight over matched tokens, sign-flipped when the
    preceding token is a negation. Documents without matches score (0, 0).
    """
    toks = tokenize(document)
    pols, subs = [], []
    for j, tok in enumerate(toks):
        w = lexicon.weights.get(tok)
        if w is None:
            continue
        sign = -1.0 if j > 0 and toks[j - 1] in lexicon.negations else 1.0
        pols.append(sign * w[0])
        subs.append(w[1])
    if not pols:
        return 0.0, 0.0
    return sum(pols) / len(pols), sum(subs) / len(subs)


def sentiment(corpus: DailyCorpus, lexicon: Lexicon):
    """Day row in :data:`SENTIMENT_DIMS` order; zeros for an empty day."""
    if not lexicon.weights:
        raise ValueError("lexicon is empty")
    if not corpus.documents:
        return np.zeros(len(SENTIMENT_DIMS))
    scores = np.array([document_sentiment(d, lexicon) for d in corpus.documents])
    pol, sub = scores[:, 0], scores[:, 1]
    return np.array([pol.mean(), pol.min(), pol.max(), sub.mean(), sub.min()])


def read_corpus(path, fields=DOC_FIELDS):
    """Group a JSON-lines corpus into :class:`DailyCorpus` objects by date.

    Each record's selected ``fields`` are joined into one document.
    """
    days = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                date = np.datetime64(str(rec["date"])[:10], "D")
            except (ValueError, KeyError) as exc:
                raise ParseError(path, line_no, f"bad corpus record: {exc}") from None
            text = " ".join(str(rec.get(f) or "") for f in fields).strip()
            days[date].append(text)
    return [DailyCorpus(d, days[d]) for d in sorted(days)]


def build_tables(corpora, keywords=None, lexicon=None):
    """Compute the locally derivable groups for a list of daily corpora."""
    dates = [c.date for c in corpora]
    tables = {"count": TextFeatureTable("count", dates, [count_features(c) for c in corpora], list(COUNT_DIMS))}
    if keywords:
        tables["wordfreq"] = TextFeatureTable(
            "wordfreq", dates, [keyword_frequencies(c, keywords) for c in corpora], list(keywords)
        )
    lexicon = lexicon or Lexicon.default()
    tables["sentiment"] = TextFeatureTable(
        "sentiment", dates, [sentiment(c, lexicon) for c in corpora], list(SENTIMENT_DIMS)
    )
    return tables


def load_precomputed(path, group, expected_dims=100):
    """Load and validate a topic or embedding table.

    Topic rows within 1e-3 of the simplex are renormalised, others raise
    :class:`SimplexViolation`. Embedding tables must have ``expected_dims``
    columns (pass ``None`` to skip the check).
    """
    if group not in ("topic", "embedding"):
        raise ValueError(f"group must be topic or embedding, not {group!r}")
    from newsload.ingest import read_csv

    raw = read_csv(path, "text_features", group=group)
    values = raw.values.copy()
    if not np.all(np.isfinite(values)):
        raise ParseError(path, 0, "non-finite feature values")
    if group == "topic":
        if np.any(values < 0):
            raise SimplexViolation(f"{path}: negative topic weight")
        sums = values.sum(axis=1)
        bad = np.abs(sums - 1.0) > 1e-3
        if bad.any():
            i = int(np.argmax(bad))
            raise SimplexViolation(f"{path}: row {i + 2} sums to {sums[i]:.6g}")
        off = np.abs(sums - 1.0) > 1e-12
        values[off] /= sums[off, None]
    elif expected_dims is not None and values.shape[1] != expected_dims:
        raise DimensionMismatch(f"{path}: expected {expected_dims} embedding dims, got {values.shape[1]}")
    return TextFeatureTable(group, raw.times, values, list(raw.names))


def write_table(table: TextFeatureTable, directory):
    """Write ``text_<group>.csv`` in the ingest schema."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"text_{table.group}.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + list(table.dim_names))
        for d, row in zip(table.dates, table.values):
            w.writerow([str(d)] + [f"{v:.6g}" for v in row])
    return path
