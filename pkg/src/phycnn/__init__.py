"""Physics-guided convolutional surrogates for seismic response modeling."""

__version__ = "0.1.0"
