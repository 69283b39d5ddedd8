"""gaplab: desk-scale numerics for the fundamental gap on negatively curved surfaces."""

__version__ = "0.1.0"
