"""Personalized counterfactual recourse generation and preference elicitation."""

__version__ = "0.1.0"
