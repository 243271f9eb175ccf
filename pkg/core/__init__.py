# Numerical core of the boundary-layer stability toolkit
