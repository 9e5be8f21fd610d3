"""oscilla: oscillation functionals over packed window families.

Submodules:
    fields       scalar fields, analytic sources, mollification, grid variation
    windows      window geometry, quadrature, polynomial fits, oscillation
    packing      disjoint window family selection (exact and heuristic)
    functionals  scaled oscillation functionals, eps ladders, anisotropy, beta constants
    gammalab     scaling-limit experiments with verdicts and reports
    denoise      variational denoising with the oscillation regularizer
    fieldio      CSV and PGM field formats
    reporting    canonical JSON / CSV / SVG / PNG report emission
    cli          command line entry point
"""

__version__ = "0.1.0"
