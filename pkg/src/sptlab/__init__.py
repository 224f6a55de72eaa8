"""Simulation laboratory for market-weight diffusions on the simplex,
functionally generated trading strategies, cumulative volatility
functionals, and Monte-Carlo verification of relative-arbitrage claims.
"""

__version__ = "0.1.0"

from . import (arbitrage, config, errors, genfn, ingest, models, quadvar,
               simplex, strategies)

__all__ = ["arbitrage", "config", "errors", "genfn", "ingest", "models",
           "quadvar", "simplex", "strategies", "__version__"]
