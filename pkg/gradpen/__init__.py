"""p-power penalty finite elements for problems with a uniform gradient constraint."""

__version__ = "0.1.0"
