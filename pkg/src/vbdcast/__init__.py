"""Spatio-temporal forecasting of monthly vector-borne disease counts.

A regression + LSTM neighbor encoder + quadratic climate cross layer +
month-embedding seasonality model, with preprocessing, training, an ARIMA
baseline and a one-step-ahead evaluation harness.
"""

__version__ = "0.1.0"
