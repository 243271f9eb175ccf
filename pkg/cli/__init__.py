# CLI module for the boundary-layer stability toolkit
