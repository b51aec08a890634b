"""Ball-openings of convex bodies, epigraph regularisation of convex functions,
smooth-max gluing and second-order certification."""

__version__ = "0.1.0"
