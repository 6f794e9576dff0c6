"""Boundary-layer example with adaptive refinement driven by either estimator."""
from pathlib import Path

from _common import parser, run

from afcpost.problems import example_boundary_layer

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--technique", nargs="+", default=["afc_energy", "afc_supg_energy"],
                   choices=["afc_energy", "afc_supg_energy"])
    a = p.parse_args()
    for tech in a.technique:
        for lim in a.limiter:
            run(example_boundary_layer(a.epsilon), tech, lim, Path(a.out), "adaptive", a.max_dofs, verbose=a.verbose)
