"""haloseq: a tagged seq2seq trainer with a hidden-state neighborhood regularizer."""

__version__ = "0.1.0"
