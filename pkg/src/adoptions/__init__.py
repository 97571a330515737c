"""Pricing, hedging and revenue analysis for multi-keyword multi-click ad options."""

__version__ = "1.0.0"
