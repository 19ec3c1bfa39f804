"""Stdio scorer bridge wrapping image classifiers."""

from .bridge import serve
from .models import BridgeConfig, WrappedModel, build

__all__ = ["BridgeConfig", "WrappedModel", "build", "serve"]
