"""haptosim: a desk-scale numerical laboratory for a 2-D chemotaxis
system with a non-diffusible matrix field.

Subpackages map onto the pipeline: `constants` (closed-form thresholds),
`domain` (grid + discrete calculus), `linsolve` (matrix-free CG),
`model` (IMEX stepping with the exact matrix-field update), `initdata`
(bumps and the concentrating family), `diagnostics` (energies, rates,
blow-up detection) and `harness` (configs, runners, sweeps, CLI).
"""

from ._kernels import available_backends, backend_name

__all__ = ["available_backends", "backend_name"]
__version__ = "0.1.0"
