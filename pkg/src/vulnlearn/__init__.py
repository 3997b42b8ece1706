"""Function-level C/C++ vulnerability detection toolkit.

Subpackages cover the full experiment chain: lexing source into anonymized
token streams, unsupervised token representations (bag-of-words and
skip-gram embeddings), control-flow features from a textual IR, tree
ensembles and a convolutional text classifier, dataset construction with
strict deduplication, and ROC / precision-recall evaluation.
"""

__version__ = "0.1.0"

from . import embedding, irfeat, lexer, metrics, models, pipeline  # noqa: F401
