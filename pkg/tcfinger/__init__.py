"""Time-Constant fingerprinting of plant actuators, CUSUM attack detection and watermark evaluation."""

__version__ = "0.1.0"
