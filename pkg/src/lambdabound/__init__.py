"""Lower-bound certification for wavelength routing under single-link failures.

The package builds the problem's linear models, solves them with an embedded
bounded-variable simplex (or a Benders decomposition for the aggregated
relaxation), and cross-checks results with an exhaustive oracle plus a
solution validator. See the CLI (`lambdabound --help`) for the command
surface.
"""

__version__ = "0.1.0"
