"""Self-contained tf-idf + multinomial Naive Bayes reference baseline.

Tokens are whitespace-split lowercased words of already-normalized text.
tf is the raw count, idf = ln((1+n)/(1+df)) + 1, rows are L2-normalized;
the NB step applies Laplace-smoothed multinomial likelihoods in log space.

Checkpoint format "OFSNB001", little-endian: magic, u32 class count,
length-prefixed class names (u16 + UTF-8), u32 vocabulary size,
length-prefixed tokens in index order, f64 idf[V], f64 alpha,
f64 log_priors[C], f64 log_likelihood[C*V] row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import BadMagic, DataError, EmptyClass, EmptyVocabulary, TruncatedFile

MAGIC = b"OFSNB001"


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)


@dataclass
class NaiveBayesModel:
    classes: tuple[str, ...]
    log_priors: np.ndarray
    log_likelihood: np.ndarray  # shape (n_classes, vocab size)
    alpha: float


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def _count_matrix(texts: Sequence[str], vocabulary: dict[str, int]) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        row: dict[int, int] = {}
        for token in tokenize(text):
            col = vocabulary.get(token)
            if col is not None:
                row[col] = row.get(col, 0) + 1
        for col in sorted(row):
            indices.append(col)
            data.append(float(row[col]))
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (data, indices, indptr), shape=(len(texts), len(vocabulary)), dtype=np.float64
    )


def _l2_normalize(matrix: sparse.csr_matrix) -> sparse.csr_matrix:
    norms = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return (sparse.diags(scale) @ matrix).tocsr()


def tfidf_fit_transform(texts: Sequence[str]) -> tuple[TfidfModel, sparse.csr_matrix]:
    """Fit vocabulary/idf on the corpus and return the normalized matrix."""
    vocab_terms = sorted({tok for text in texts for tok in tokenize(text)})
    if not vocab_terms:
        raise EmptyVocabulary("corpus contains no tokens")
    vocabulary = {tok: i for i, tok in enumerate(vocab_terms)}
    counts = _count_matrix(texts, vocabulary)
    df = np.asarray((counts > 0).sum(axis=0)).ravel()
    n = len(texts)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    model = TfidfModel(vocabulary=vocabulary, idf=idf)
    return model, _l2_normalize((counts @ sparse.diags(idf)).tocsr())


def tfidf_transform(model: TfidfModel, texts: Sequence[str]) -> sparse.csr_matrix:
    counts = _count_matrix(texts, model.vocabulary)
    return _l2_normalize((counts @ sparse.diags(model.idf)).tocsr())


def nb_train(
    matrix: sparse.csr_matrix,
    labels: Sequence[str],
    classes: Sequence[str],
    alpha: float = 1.0,
) -> NaiveBayesModel:
    """Multinomial NB with additive smoothing over tf-idf feature mass."""
    if alpha <= 0:
        raise DataError(f"alpha must be positive: {alpha}")
    if matrix.shape[0] != len(labels):
        raise DataError(f"{matrix.shape[0]} rows vs {len(labels)} labels")
    n_classes = len(classes)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros(n_classes)
    feature_mass = np.zeros((n_classes, matrix.shape[1]))
    for row, label in enumerate(labels):
        if label not in index:
            raise DataError(f"label {label!r} not in {tuple(classes)}")
        c = index[label]
        counts[c] += 1
        feature_mass[c] += matrix.getrow(row).toarray().ravel()
    absent = [classes[i] for i in range(n_classes) if counts[i] == 0]
    if absent:
        raise EmptyClass(f"no training documents for class(es) {absent}")
    log_priors = np.log(counts / counts.sum())
    smoothed = feature_mass + alpha
    log_likelihood = np.log(smoothed / smoothed.sum(axis=1, keepdims=True))
    return NaiveBayesModel(
        classes=tuple(classes),
        log_priors=log_priors,
        log_likelihood=log_likelihood,
        alpha=alpha,
    )


def nb_scores(model: NaiveBayesModel, matrix: sparse.csr_matrix) -> np.ndarray:
    return matrix @ model.log_likelihood.T + model.log_priors


def nb_predict(model: NaiveBayesModel, matrix: sparse.csr_matrix) -> list[str]:
    """Argmax of log-posterior per row; lowest class index wins ties.

    Rows with no known tokens fall back to the prior argmax.
    """
    picks = np.argmax(nb_scores(model, matrix), axis=1)
    return [model.classes[int(i)] for i in picks]


def save_baseline(path, tfidf: TfidfModel, nb: NaiveBayesModel) -> None:
    tokens = sorted(tfidf.vocabulary, key=tfidf.vocabulary.get)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(nb.classes)))
        for cls in nb.classes:
            raw = cls.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(struct.pack("<I", len(tokens)))
        for token in tokens:
            raw = token.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(tfidf.idf.astype("<f8", copy=False).tobytes())
        fh.write(struct.pack("<d", nb.alpha))
        fh.write(nb.log_priors.astype("<f8", copy=False).tobytes())
        fh.write(nb.log_likelihood.astype("<f8", copy=False).tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFile(f"unexpected EOF while reading {what}")
    return buf


def load_baseline(path) -> tuple[TfidfModel, NaiveBayesModel]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise BadMagic(f"{path}: expected magic {MAGIC!r}, got {magic!r}")
        (n_classes,) = struct.unpack("<I", _read_exact(fh, 4, "class count"))
        classes = []
        for _ in range(n_classes):
            (length,) = struct.unpack("<H", _read_exact(fh, 2, "class name length"))
            classes.append(_read_exact(fh, length, "class name").decode("utf-8"))
        (vocab_size,) = struct.unpack("<I", _read_exact(fh, 4, "vocabulary size"))
        vocabulary = {}
        for i in range(vocab_size):
            (length,) = struct.unpack("<H", _read_exact(fh, 2, "token length"))
            vocabulary[_read_exact(fh, length, "token").decode("utf-8")] = i
        idf = np.frombuffer(_read_exact(fh, 8 * vocab_size, "idf"), dtype="<f8").copy()
        (alpha,) = struct.unpack("<d", _read_exact(fh, 8, "alpha"))
        log_priors = np.frombuffer(
            _read_exact(fh, 8 * n_classes, "log priors"), dtype="<f8"
        ).copy()
        log_likelihood = (
            np.frombuffer(
                _read_exact(fh, 8 * n_classes * vocab_size, "log likelihoods"), dtype="<f8"
            )
            .reshape(n_classes, vocab_size)
            .copy()
        )
    return (
        TfidfModel(vocabulary=vocabulary, idf=idf),
        NaiveBayesModel(
            classes=tuple(classes),
            log_priors=log_priors,
            log_likelihood=log_likelihood,
            alpha=alpha,
        ),
    )
