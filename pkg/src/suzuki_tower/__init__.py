"""Near polygons of the Suzuki tower, their valuations and valuation geometries."""

__version__ = "0.1.0"
