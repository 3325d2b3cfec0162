"""
Output layer for halfspace-kernels.

Static SVG plots of kernel profiles, solution slices and experiment series.
"""
