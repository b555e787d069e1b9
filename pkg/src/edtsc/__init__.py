"""Electronic differential with traction and stability control for a
rear-driven two-motor electric vehicle."""

__version__ = "0.1.0"
