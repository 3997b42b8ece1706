"""Classifiers: tree ensembles, the convolutional text model, hybrids.

``trees`` holds the extra-trees / random-forest implementation, ``convnet``
the convolutional text classifier, and ``io`` the versioned binary model
container. This package level wires them together: the hybrid model that
feeds pooled convolutional features into an extra-trees ensemble, the
combined build+bag-of-words feature vector, and prediction dispatch over a
saved model bundle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..embedding import EmbeddingMatrix, Vocabulary, bow_matrix
from ..lexer import TokenSequence
from .convnet import (
    ConvConfig,
    ConvTextModel,
    conv_features,
    conv_features_batch,
    predict_conv,
    train_conv,
)
from .trees import EnsembleConfig, TreeEnsemble, predict_proba, train_ensemble

MODEL_KINDS = ("bow-et", "w2v-cnn", "cnn-et", "build-rf", "combined")


def train_hybrid(
    corpus: Sequence[tuple[TokenSequence, int]],
    init: EmbeddingMatrix,
    conv_cfg: ConvConfig,
    tree_cfg: EnsembleConfig,
) -> tuple[ConvTextModel, TreeEnsemble]:
    """Train the conv model, freeze it, and fit an extra-trees ensemble on
    its pooled convolutional features."""
    conv = train_conv(corpus, init, conv_cfg)
    feats = conv_features_batch(conv, [seq for seq, _ in corpus])
    labels = np.array([label for _, label in corpus], dtype=np.int64)
    ensemble = train_ensemble(feats, labels, replace(tree_cfg, mode="extra_trees"))
    return conv, ensemble


def predict_hybrid(
    conv: ConvTextModel, ensemble: TreeEnsemble, seqs: Sequence[TokenSequence]
) -> np.ndarray:
    return predict_proba(ensemble, conv_features_batch(conv, seqs))


def combine_features(
    build_vec: np.ndarray,
    bow_vec: np.ndarray,
    build_fid: str | None = None,
    bow_fid: str | None = None,
) -> np.ndarray:
    """Concatenate one function's build feature vector and bag-of-words
    vector, build features first. Refuses mismatched provenance ids."""
    if build_fid is not None and bow_fid is not None and build_fid != bow_fid:
        raise ValueError(
            f"cannot combine features of different functions: "
            f"{build_fid!r} vs {bow_fid!r}"
        )
    return np.concatenate([np.asarray(build_vec, dtype=np.float64),
                           np.asarray(bow_vec, dtype=np.float64)])


@dataclass
class ModelBundle:
    """A trained model plus the encoders its prediction path needs."""

    kind: str  # one of MODEL_KINDS
    ensemble: Optional[TreeEnsemble] = None
    conv: Optional[ConvTextModel] = None
    vocab: Optional[Vocabulary] = None
    config_hash: str = ""


def score_bundle(
    bundle: ModelBundle,
    token_seqs: Sequence[TokenSequence] | None = None,
    build_vectors: np.ndarray | None = None,
) -> np.ndarray:
    """Probability scores for a batch of functions, using whichever feature
    inputs the bundle's kind requires."""
    kind = bundle.kind
    if kind == "bow-et":
        X = bow_matrix(token_seqs, bundle.vocab)
        return predict_proba(bundle.ensemble, X)
    if kind == "w2v-cnn":
        return predict_conv(bundle.conv, token_seqs)
    if kind == "cnn-et":
        return predict_hybrid(bundle.conv, bundle.ensemble, token_seqs)
    if kind == "build-rf":
        return predict_proba(bundle.ensemble, np.asarray(build_vectors, dtype=np.float64))
    if kind == "combined":
        bow = bow_matrix(token_seqs, bundle.vocab)
        X = np.hstack([np.asarray(build_vectors, dtype=np.float64), bow])
        return predict_proba(bundle.ensemble, X)
    raise ValueError(f"unknown model kind {kind!r}")


from .io import load_model, save_model  # noqa: E402,F401

__all__ = [
    "MODEL_KINDS",
    "ConvConfig",
    "ConvTextModel",
    "EnsembleConfig",
    "ModelBundle",
    "TreeEnsemble",
    "combine_features",
    "conv_features",
    "conv_features_batch",
    "load_model",
    "predict_conv",
    "predict_hybrid",
    "predict_proba",
    "save_model",
    "score_bundle",
    "train_conv",
    "train_ensemble",
    "train_hybrid",
]
