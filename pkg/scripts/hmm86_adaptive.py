"""Interior and boundary layers without exact solution: DMP and layer smearing on adaptive grids."""
from pathlib import Path

from _common import parser, run

from afcpost.problems import example_hmm86

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--epsilon", type=float, default=1e-4)
    # a tight nonlinear tolerance so that bound violations are not solver noise
    p.add_argument("--tol", type=float, default=1e-12)
    a = p.parse_args()
    for lim in a.limiter:
        rec = run(example_hmm86(a.epsilon), "afc_energy", lim, Path(a.out), "adaptive", a.max_dofs, a.tol,
                  verbose=a.verbose)
        lo = min(r.u_min for r in rec.rows)
        hi = max(r.u_max for r in rec.rows)
        print(f"{lim}: min u_h = {lo:.3e}, max u_h - 1 = {hi - 1:.3e}")
