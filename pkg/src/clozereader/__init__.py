"""Cloze question-answering toolkit.

Two halves, usable separately:

* dataset construction: turn plain-text books into cloze questions in the
  numbered 21-line interchange format (20 context sentences, one gapped
  question sentence with an answer and ten candidates), and
* a pointer-style recurrent reader: bidirectional GRU encoders whose
  attention weights are summed per surface form to score candidates,
  trained with hand-written backpropagation on a small dense-tensor core.

Everything is seeded and deterministic; see the README for the CLI surface.
"""

__version__ = "0.1.0"


class ClozereaderError(Exception):
    """Base class for all errors raised by this package."""
