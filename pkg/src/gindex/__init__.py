"""Index theory for semiclassical crossed products on tori."""

__version__ = "0.1.0"
