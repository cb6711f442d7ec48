"""Desk-scale benchmark toolkit for sequence-pair classification.

Builds alignment-verified DNA and DNA-protein pair datasets, measures token
budgets across English and DNA, trains tiny decoder and encoder transformers,
and evaluates them against an exact random baseline.
"""

__version__ = "0.1.0"
