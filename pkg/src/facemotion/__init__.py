"""Facial expression recognition from phase-based optical flow on a face grid.

Modules, in pipeline order: ``seqio`` (frames), ``optflow`` (motion
fields), ``facegrid`` (segment layouts), ``features`` (P/LX/LY features and
cleaning), ``learners`` (five classifier families), ``evalkit`` (repeated
cross-validation, sweeps, ranking, PCA) and ``pipeline``/``cli``.
"""

__version__ = "0.1.0"
