"""senticast: sentiment vs. embedding features for stock close-price forecasting."""

__version__ = "0.1.0"
