"""Semi-supervised learning lab: Ensemble Projections, chi-square baselines and LapRLS."""

__version__ = "0.1.0"
