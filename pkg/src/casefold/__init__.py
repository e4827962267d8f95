"""Casing-robust sequence labeling at desk scale.

Generate the six casing flavors of a labeled corpus, train a character-level
BiLSTM truecaser and word-level BiLSTM(-CRF) taggers on them, and evaluate
with the cased/uncased test-averaging protocol.
"""

__version__ = "0.1.0"

from casefold.corpus import (
    LabeledCorpus,
    OovPolicy,
    Sentence,
    Token,
    Vocabulary,
    build_vocabulary,
    encode,
    parse_column_corpus,
)
from casefold.flavors import Flavor, FlavoredDataset, lowercase_sentence, make_flavor

__all__ = [
    "LabeledCorpus",
    "OovPolicy",
    "Sentence",
    "Token",
    "Vocabulary",
    "build_vocabulary",
    "encode",
    "parse_column_corpus",
    "Flavor",
    "FlavoredDataset",
    "lowercase_sentence",
    "make_flavor",
    "__version__",
]
