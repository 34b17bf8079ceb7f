"""Self-guided quantum state tomography for qudits, with simulated noisy measurements."""

__version__ = "0.1.0"
