"""Self-organizing maps on tessellated closed manifolds and disks."""

__version__ = "0.1.0"
