"""Numerical laboratory for null control of the structurally damped beam.

Subpackages cover the full pipeline: space/time grids and spectral calculus
(`torus`), construction and auditing of the exponential space-time weights
(`weights`), forward dynamics of the damped beam with potential (`dynamics`),
numerical stress tests of the weighted observability inequality (`audit`),
exact-rational certification of the absorption parameters (`zeta`), control
synthesis by quadratic minimization (`hum`), and a configuration-driven
experiment runner (`config`, `experiments`, `cli`).
"""

__version__ = "0.1.0"
