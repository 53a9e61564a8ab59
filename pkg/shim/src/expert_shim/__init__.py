"""Reference expert-side implementation of the router wire protocol."""

__version__ = "0.1.0"

from .server import OutcomeRule, ShimConfig, create_app

__all__ = ["OutcomeRule", "ShimConfig", "create_app", "__version__"]
