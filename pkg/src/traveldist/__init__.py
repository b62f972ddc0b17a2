"""Travel-distance prediction from claims-style records.

Place-of-residence estimation, visit features, a numpy 1-D CNN with baselines,
metrics and Integrated Gradients attribution, plus a synthetic corpus generator.
"""
__version__ = "0.1.0"
