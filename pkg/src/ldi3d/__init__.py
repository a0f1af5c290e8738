"""Single-photo 3D parallax pipeline built on layered depth images."""

__version__ = "0.1.0"
