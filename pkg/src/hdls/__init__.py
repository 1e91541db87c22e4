"""Spectral estimation for high-dimensional linear time series.

Submodules:
    model     process families, grid points, joint spectral grids
    synth     synthetic panel samplers (time domain and frequency domain)
    spectra   integrated periodograms and empirical Stieltjes objects
    lsd       the limiting fixed-point system and its solver
    fit       weight families, discrepancy, simplex optimization
    consistency  identifiability diagnostics
    sdm       spectral-density-matrix estimator
    modelsel  bootstrap model selection
    cli       command-line interface and preprocessing pipeline
"""

__version__ = "0.1.0"
