"""Green portfolio analytics.

Builds an environment-score augmented efficient frontier from annual asset
data, picks the portfolio with the best score-weighted Sharpe ratio, fits a
CAPM extended with physical and transition climate-risk factors, and projects
returns under reference, mild, high and stress climate scenarios.
"""

__version__ = "0.1.0"

DEFAULT_RISK_FREE = 0.0695
"""One-year Government of India bond yield used as the risk-free rate."""
