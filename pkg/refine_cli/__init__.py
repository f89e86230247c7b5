"""refine-cli - a bounded workbench for refinement proofs in concurrent separation logic."""

__version__ = "0.1.0"
__author__ = "TKR"
