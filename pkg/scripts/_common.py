"""Shared helpers for the experiment scripts."""
import argparse
import logging
from pathlib import Path

from afcpost.adaptivity import AdaptiveOptions, adaptive_loop
from afcpost.afc import SolverOptions

SUMMARY = ("level", "dofs", "error_energy", "eta", "effectivity", "eta_supg", "eta_afc_supg", "smear_int",
           "nl_iters", "converged")


def parser(description: str, limiters=("kuzmin", "bjk")) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--limiter", nargs="+", default=list(limiters), choices=["kuzmin", "bjk"])
    p.add_argument("--max-dofs", type=int, default=100_000)
    p.add_argument("--out", default="results")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(prob, technique: str, limiter: str, out: Path, refinement: str = "adaptive", max_dofs: int = 100_000,
        tol: float = 1e-10, verbose: bool = False):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)
    opts = AdaptiveOptions(technique=technique, limiter=limiter, refinement=refinement, max_dofs=max_dofs,
                           solver=SolverOptions(tol=tol))

    def show(row, mesh, u):
        cells = []
        for name in SUMMARY:
            v = getattr(row, name)
            cells.append("-" if v is None else (f"{v:.5g}" if isinstance(v, float) else str(v)))
        print("  ".join(cells), f"u in [{row.u_min:.3g}, {row.u_max:.6g}]", flush=True)

    print(f"# {prob.name} {technique} {limiter} {refinement}")
    print("  ".join(SUMMARY))
    record = adaptive_loop(prob, technique, limiter, opts, on_level=show)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{prob.name}_{technique}_{limiter}_{refinement}.csv"
    record.write_csv(path)
    print(f"wrote {path}")
    return record
