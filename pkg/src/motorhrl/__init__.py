"""Two-level skill-based reinforcement learning on toy locomotor environments."""

__version__ = "0.1.0"
