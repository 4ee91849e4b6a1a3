"""Diffusion-based counterfactual and model-level explanations for graph
classifiers, with a desk-scale evaluation protocol."""

__version__ = "0.1.0"
