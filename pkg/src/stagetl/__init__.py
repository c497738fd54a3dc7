"""Staged transfer-learning experiments for small image classifiers.

Subpackages: ``nn`` (explicit-gradient numerics core), ``data`` (patch
pipeline), ``pipeline`` (training stages and the experiment matrix), plus
``synth`` (benchmark generator), ``metrics`` and ``embed``.
"""

__version__ = "0.1.0"
