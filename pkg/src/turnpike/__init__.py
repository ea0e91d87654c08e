"""Shape optimization of the Dirichlet heat equation on rasterized domains."""

__version__ = '0.1.0'
