"""comb: software twin of a compact in-hive XY robot platform.

Deterministic two-axis stage simulation, mode-based controller, waggle and
raster-scan trajectory generation, and the analysis toolkit used to
characterize the platform (trajectory error decomposition, line-scan
spectral estimation, tile mosaicing, access-window geometry).
"""

__version__ = "0.1.0"
