"""Billiard flow on the unit 3-torus with three orthogonal cylindrical
scatterers: simulation, admissible-orbit construction, rotation vectors,
and itinerary-entropy bounds."""

__version__ = "0.1.0"
