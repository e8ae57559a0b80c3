"""Boundary recovery of depth-stratified Lame moduli from localized DN pairings.

The package is organized around the pipeline

    elastic   -- isotropic tensor algebra, admissibility, depth profiles
    stroh     -- 6x6 first-order formalism at a point, Jordan chain, impedance Z
    ansatz    -- oscillating boundary probes and the corrector cascade
    forward   -- independent DtN forward solver for stratified half-spaces
    reconstruct -- N-ladders, extrapolation, recovery of moduli and derivatives
    geometry  -- boundary normal coordinates and the curved-boundary algebra
    cli       -- configuration-driven orchestration
"""

__version__ = "0.1.0"
