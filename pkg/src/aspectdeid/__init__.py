"""Aspect-guided de-identification engine.

Learns aspect query tokens aligned with expert reference notes, extracts
aspect-relevant sub-sentences from personal documents, substitutes them under
a k-anonymity constraint, and evaluates utility, fidelity, and residual
re-identifiability of the result.
"""

__version__ = "0.1.0"
