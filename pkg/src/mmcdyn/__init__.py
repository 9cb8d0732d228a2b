"""mmcdyn -- dual-model Modular Multilevel Converter dynamics toolkit.

Two models of the same converter:

* ``aam``  -- stationary-frame arm-averaged Sigma/Delta model (the full-harmonic
  reference),
* ``ssti`` -- the 12-state steady-state-time-invariant dqz model, whose states
  settle to constants and which can be linearized directly.

Plus a shared CCSC + grid-current vector controller (``control``), a fixed-step
closed-loop simulator (``sim``), equilibrium / eigenvalue / cross-model
comparison machinery (``analysis``), and a CLI (``mmcdyn``).
"""

from mmcdyn.params import MmcParams, load_params, loads_params, to_per_unit

__all__ = ["MmcParams", "load_params", "loads_params", "to_per_unit"]

__version__ = "0.1.0"
