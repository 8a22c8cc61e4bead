"""Voice-command control stack for a simulated surgical robotic assistant."""

__version__ = "0.1.0"
