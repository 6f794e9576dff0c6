import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afcpost.adaptivity import CSV_COLUMNS, AdaptiveOptions, adaptive_loop, mark_cells
from afcpost.mesh import check_admissible, read_mesh
from afcpost.problems import example_boundary_layer, example_hmm86


def test_mark_cells_examples():
    assert mark_cells([1.0, 0.4, 0.6, 0.2], 0.5, 0.0).tolist() == [0, 2]
    assert mark_cells([1.0, 0.4, 0.6, 0.2], 1.0, 0.0).tolist() == [0]
    # theta is halved until half of the cells are marked: 0.5 -> 0.25
    assert mark_cells([1.0, 0.3, 0.2, 0.1], 0.5, 0.5).tolist() == [0, 1]


@pytest.mark.parametrize("bad", [[], [-1.0, 1.0], [np.nan, 1.0], [0.0, 0.0]])
def test_mark_cells_rejects(bad):
    with pytest.raises(ValueError):
        mark_cells(bad)


@settings(max_examples=50, deadline=None)
@given(eta=st.lists(st.floats(0, 1e3), min_size=1, max_size=200), theta=st.floats(0.01, 1.0),
       frac=st.floats(0.0, 1.0))
def test_mark_cells_properties(eta, theta, frac):
    eta = np.array(eta)
    if eta.max() == 0:
        return
    marked = mark_cells(eta, theta, frac)
    assert marked.size >= 1 and np.all(np.diff(marked) > 0)
    assert eta[marked].min() >= eta[np.setdiff1d(np.arange(eta.size), marked)].max(initial=0.0)
    assert np.argmax(eta) in marked


def test_uniform_dof_sequence():
    rec = adaptive_loop(example_boundary_layer(), opts=AdaptiveOptions(refinement="uniform", max_dofs=1100))
    assert rec.column("dofs") == [25, 81, 289, 1089]
    assert all(rec.column("converged"))


def test_deterministic_without_timing():
    opts = AdaptiveOptions(max_dofs=1500, timing=False)
    a = adaptive_loop(example_boundary_layer(), opts=opts).to_csv()
    b = adaptive_loop(example_boundary_layer(), opts=opts).to_csv()
    assert a == b
    assert a.splitlines()[0].split(",") == CSV_COLUMNS


def test_levels_are_admissible_and_capped():
    seen = []

    def check(row, mesh, u):
        check_admissible(mesh)
        seen.append((row.dofs, mesh.n_vertices, len(u)))

    rec = adaptive_loop(example_boundary_layer(), "afc_supg_energy", "bjk", AdaptiveOptions(max_dofs=2000),
                        on_level=check)
    assert all(a == b == c <= 2000 for a, b, c in seen)
    assert rec.column("eta_supg")[0] is not None and rec.column("eta1")[0] is None


def test_eta_tol_stops():
    rec = adaptive_loop(example_boundary_layer(), opts=AdaptiveOptions(eta_tol=1e9))
    assert len(rec.rows) == 1


def test_smear_only_without_exact_solution():
    rec = adaptive_loop(example_hmm86(1e-4), opts=AdaptiveOptions(max_dofs=300))
    assert rec.column("error_energy") == [None] * len(rec.rows)
    assert rec.column("smear_int")[-1] is not None
    assert ",," in rec.to_csv()


def test_dump(tmp_path):
    adaptive_loop(example_boundary_layer(), opts=AdaptiveOptions(max_dofs=100, dump_dir=str(tmp_path)))
    m = read_mesh(tmp_path / "mesh_003.txt")
    assert m.n_vertices == 81 and np.loadtxt(tmp_path / "solution_003.txt").size == 81


def test_option_validation():
    for bad in (dict(technique="x"), dict(refinement="x"), dict(theta=0.0), dict(min_fraction=2.0),
                dict(max_dofs=0), dict(start_level=3, uniform_until=2)):
        with pytest.raises(ValueError):
            AdaptiveOptions(**bad)


@pytest.mark.slow
def test_refinement_concentrates_in_the_layer():
    frac = {}

    def record(row, mesh, u):
        frac[row.level] = np.mean(mesh.vertices[mesh.cells].mean(axis=1)[:, 0] > 0.8)

    adaptive_loop(example_boundary_layer(1e-3), "afc_energy", "bjk", AdaptiveOptions(max_dofs=20_000),
                  on_level=record)
    assert frac[10] >= 0.5
