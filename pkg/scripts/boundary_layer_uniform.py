"""Boundary-layer example on uniformly refined grids: errors and AFC-energy effectivity."""
from pathlib import Path

from _common import parser, run

from afcpost.problems import example_boundary_layer

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.set_defaults(max_dofs=70_000)
    a = p.parse_args()
    for lim in a.limiter:
        run(example_boundary_layer(a.epsilon), "afc_energy", lim, Path(a.out), "uniform", a.max_dofs,
            verbose=a.verbose)
