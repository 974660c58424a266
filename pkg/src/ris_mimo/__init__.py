"""Channel estimation for RIS-assisted downlink massive MIMO."""

__version__ = "0.1.0"
