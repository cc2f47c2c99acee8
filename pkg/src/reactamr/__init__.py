"""Block-structured AMR reacting-flow solver with bulk-sparse kinetics scheduling."""

__version__ = "0.1.0"
