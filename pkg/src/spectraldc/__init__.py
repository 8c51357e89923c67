"""Communication-avoiding dense eigensolvers with a two-level cost model."""
from .ledger import CostLedger, null_ledger

__version__ = "0.1.0"

__all__ = ["CostLedger", "null_ledger", "__version__"]
