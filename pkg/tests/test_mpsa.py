import numpy as np
import pytest
from numpy.testing import assert_allclose

import polyelast as pe
from polyelast import bc, meshgen, mpsa
from polyelast.errors import AssemblyError, LocalSolveError
from polyelast.material import MaterialField, isotropic_stress
from polyelast.mesh import build_mesh, interaction_regions
from polyelast.verify import LinearField

MU, LAM = 1.0, 1.5


def region_at(mesh, point):
    regions = interaction_regions(mesh)
    for r in regions:
        if np.allclose(mesh.nodes[r.vertex], point):
            return r
    raise AssertionError(f"no vertex at {point}")


def linear_params(rw, mesh, field):
    boundary = bc.dirichlet_all(mesh, displacement=field.displacement)
    cells = np.array([field.displacement(x) for x in mesh.cell_centroid])
    pressures = None
    if rw.with_pressure:
        pressures = np.array([LAM * field.divergence(x) for x in mesh.cell_centroid])
    return rw.params(mesh, boundary, cells, pressures)


class TestGradientMap:
    def test_axis_field_on_unit_square_subregion(self):
        mesh = build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3]])
        region = region_at(mesh, [0, 0])
        pidx, dinv = mpsa.local_gradient_map(mesh, region, 0)
        # sample u(x, y) = (x, 0): gradient from values at the continuity
        # points relative to the cell center recovers [[1, 0], [0, 0]]
        xk = mesh.cell_centroid[0]
        deltas = np.array([region.subfaces[i].midpoint - xk for i in pidx])
        grad_row = deltas[:, 0] @ dinv  # first displacement component = x
        assert_allclose(grad_row, [1.0, 0.0], atol=1e-14)

    def test_constant_samples_zero_gradient(self):
        mesh = meshgen.cartesian(2, 2)
        region = region_at(mesh, [0.5, 0.5])
        for k in region.cells:
            pidx, dinv = mpsa.local_gradient_map(mesh, region, int(k))
            ones = np.ones(2)
            assert_allclose((ones @ dinv) - (ones @ dinv), 0.0)

    def test_random_affine_recovery(self):
        rng = np.random.default_rng(21)
        mesh = meshgen.perturb(meshgen.twist(meshgen.cartesian(3, 3)), 0.2, 5)
        region = region_at(mesh, mesh.nodes[4])
        b = rng.standard_normal((2, 2))
        c = rng.standard_normal(2)
        for k in region.cells:
            k = int(k)
            pidx, dinv = mpsa.local_gradient_map(mesh, region, k)
            xk = mesh.cell_centroid[k]
            vals = np.array([b @ (region.subfaces[i].midpoint - xk) for i in pidx])
            recovered = vals.T @ dinv  # G = Delta Dinv, Delta columns per point
            assert_allclose(recovered, b, atol=1e-12)

    def test_collinear_geometry_rejected(self):
        # sliver cell: the flat mid-edge vertex sees two collinear continuity
        # points nearly aligned with the cell center
        sliver = build_mesh(
            [[0, 0], [2, 0], [4, 0], [4, 1e-12], [0, 1e-12]],
            [[0, 1, 2, 3, 4]],
        )
        with pytest.raises(mpsa.LocalGeometryError, match="vertex"):
            mpsa.local_gradient_map(sliver, region_at(sliver, [2, 0]), 0)


class TestLocalSolve:
    def test_constant_cell_values_zero_forces(self):
        mesh = meshgen.cartesian(2, 2)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        const = LinearField(np.zeros((2, 2)), np.array([0.7, -0.3]), MU, LAM)
        boundary = bc.dirichlet_all(mesh, displacement=const.displacement)
        region = region_at(mesh, [0.5, 0.5])
        rw = mpsa.local_solve(mesh, region, mat, boundary)
        params = linear_params(rw, mesh, const)
        for p in range(len(rw.pairs)):
            assert_allclose(rw.force[p] @ params, 0.0, atol=1e-13)

    def test_linear_field_gives_exact_tractions(self):
        rng = np.random.default_rng(22)
        mesh = meshgen.twist(meshgen.cartesian(3, 3))
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        field = LinearField(rng.standard_normal((2, 2)), rng.standard_normal(2),
                            MU, LAM)
        boundary = bc.dirichlet_all(mesh, displacement=field.displacement)
        sigma = isotropic_stress(MU, LAM, 0.5 * (field.b + field.b.T))
        for point in (mesh.nodes[4], mesh.nodes[7]):
            region = region_at(mesh, point)
            rw = mpsa.local_solve(mesh, region, mat, boundary)
            params = linear_params(rw, mesh, field)
            for p, sf in enumerate(rw.pairs):
                exact = sf.measure * sigma @ rw.normals[p]
                assert_allclose(rw.force[p] @ params, exact, atol=1e-11)

    def test_pure_rotation_zero_forces(self):
        mesh = meshgen.cartesian(3, 3)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        rot = LinearField(np.array([[0.0, -1.0], [1.0, 0.0]]), np.zeros(2), MU, LAM)
        boundary = bc.dirichlet_all(mesh, displacement=rot.displacement)
        region = region_at(mesh, mesh.nodes[4])
        rw = mpsa.local_solve(mesh, region, mat, boundary)
        params = linear_params(rw, mesh, rot)
        for p in range(len(rw.pairs)):
            assert_allclose(rw.force[p] @ params, 0.0, atol=1e-12)

    def test_transmissibility_antisymmetry(self):
        mesh = meshgen.perturb(meshgen.twist(meshgen.cartesian(3, 3)), 0.15, 4)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        boundary = bc.dirichlet_all(mesh)
        weights = mpsa.compute_stress_weights(mesh, mat, boundary)
        for rw in weights.weights:
            by_face = {}
            for p, sf in enumerate(rw.pairs):
                by_face.setdefault(sf.face, []).append(p)
            for f, plist in by_face.items():
                if len(plist) != 2:
                    continue
                total = rw.force[plist[0]] + rw.force[plist[1]]
                scale = max(np.abs(rw.force[plist[0]]).max(), 1e-300)
                assert np.abs(total).max() <= 1e-12 * scale


class TestAssemble:
    def test_zero_everything(self):
        mesh = meshgen.cartesian(3, 3)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        system = mpsa.assemble(mesh, mat, None, bc.dirichlet_all(mesh))
        sol = mpsa.solve(system)
        assert_allclose(sol.cells, 0.0, atol=1e-13)
        assert_allclose(sol.face_forces, 0.0, atol=1e-13)

    @pytest.mark.parametrize("make", [
        lambda: meshgen.cartesian(4, 4),
        lambda: meshgen.twist(meshgen.cartesian(4, 4)),
        lambda: meshgen.triangular(4, 4),
        lambda: meshgen.hexagonal(4, 4),
    ])
    def test_linear_patch(self, make):
        rng = np.random.default_rng(23)
        mesh = make()
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        field = LinearField(rng.standard_normal((2, 2)), rng.standard_normal(2),
                            MU, LAM)
        boundary = bc.dirichlet_all(mesh, displacement=field.displacement)
        system = mpsa.assemble(mesh, mat, field.body_force, boundary)
        sol = mpsa.solve(system)
        exact = np.array([field.displacement(x) for x in mesh.cell_centroid])
        assert np.abs(sol.cells - exact).max() <= 1e-9 * np.abs(exact).max()

    def test_face_force_antisymmetry_and_equilibrium(self):
        from polyelast.verify import ManufacturedSolution
        mesh = meshgen.twist(meshgen.cartesian(4, 4))
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        ex = ManufacturedSolution(MU, LAM)
        boundary = bc.dirichlet_all(mesh)
        system = mpsa.assemble(mesh, mat, ex.body_force, boundary)
        sol = mpsa.solve(system)
        # K'-side forces recomputed pairwise: interior antisymmetry is built
        # into the constraints; check via the global equilibrium instead:
        # sum of boundary forces equals the total body load.
        total_boundary = np.zeros(2)
        for f in mesh.boundary_faces:
            total_boundary += sol.face_forces[f]
        total_load = np.zeros(2)
        for k in range(mesh.num_cells):
            total_load += ex.body_force(mesh.cell_centroid[k]) * mesh.cell_volume[k]
        assert_allclose(total_boundary, total_load, atol=1e-10)

    def test_momentum_rows_balance_algebraically(self):
        # row sums over displacement columns vanish for interior cells:
        # adding a constant displacement changes no force
        mesh = meshgen.twist(meshgen.cartesian(4, 4))
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        boundary = bc.dirichlet_all(mesh)
        weights = mpsa.compute_stress_weights(mesh, mat, boundary)
        shift = np.tile(np.array([0.3, -0.8]), (mesh.num_cells, 1))
        forces = mpsa.face_forces(weights, boundary, shift)
        interior_vertices = {r.vertex for r in weights.regions if not r.boundary}
        for f in range(mesh.num_faces):
            a, b = mesh.face_nodes[f]
            if {int(a), int(b)} <= interior_vertices:
                assert np.abs(forces[f]).max() <= 1e-12

    def test_unknown_variant(self):
        mesh = meshgen.cartesian(2, 2)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        with pytest.raises(AssemblyError):
            mpsa.assemble(mesh, mat, None, bc.dirichlet_all(mesh), variant="x")

    def test_local_failures_collected_with_vertices(self):
        mesh = meshgen.interface_extra_nodes(4, 4, 3)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        with pytest.raises(LocalSolveError) as err:
            mpsa.assemble(mesh, mat, None, bc.dirichlet_all(mesh))
        bad = err.value.vertices
        assert len(bad) == 4 * 3  # every inserted interface node
        assert all(abs(mesh.nodes[v][0] - 0.5) < 1e-12 for v in bad)


class TestDerivedFields:
    def test_divergence_identity_field(self):
        mesh = meshgen.cartesian(3, 3)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        ident = LinearField(np.eye(2), np.zeros(2), MU, LAM)
        boundary = bc.dirichlet_all(mesh, displacement=ident.displacement)
        weights = mpsa.compute_stress_weights(mesh, mat, boundary)
        cells = np.array([ident.displacement(x) for x in mesh.cell_centroid])
        div = mpsa.cell_divergence(weights, boundary, cells)
        assert_allclose(div, 2.0, atol=1e-10)

    def test_divergence_rotation(self):
        mesh = meshgen.twist(meshgen.cartesian(3, 3))
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        rot = LinearField(np.array([[0, -1.0], [1.0, 0]]), np.zeros(2), MU, LAM)
        boundary = bc.dirichlet_all(mesh, displacement=rot.displacement)
        weights = mpsa.compute_stress_weights(mesh, mat, boundary)
        cells = np.array([rot.displacement(x) for x in mesh.cell_centroid])
        assert np.abs(mpsa.cell_divergence(weights, boundary, cells)).max() < 1e-10

    def test_divergence_random_linear(self):
        rng = np.random.default_rng(24)
        mesh = meshgen.hexagonal(3, 3)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        field = LinearField(rng.standard_normal((2, 2)), rng.standard_normal(2),
                            MU, LAM)
        boundary = bc.dirichlet_all(mesh, displacement=field.displacement)
        weights = mpsa.compute_stress_weights(mesh, mat, boundary)
        cells = np.array([field.displacement(x) for x in mesh.cell_centroid])
        div = mpsa.cell_divergence(weights, boundary, cells)
        assert_allclose(div, np.trace(field.b), atol=1e-10)

    def test_translation_invariance_of_forces(self):
        rng = np.random.default_rng(25)
        mesh = meshgen.twist(meshgen.cartesian(3, 3))
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        shift = np.array([0.4, -1.1])
        cells = rng.standard_normal((mesh.num_cells, 2))

        b0 = bc.dirichlet_all(mesh, displacement=lambda x: np.zeros(2))
        b1 = bc.dirichlet_all(mesh, displacement=lambda x: shift)
        weights = mpsa.compute_stress_weights(mesh, mat, b0)
        f0 = mpsa.face_forces(weights, b0, cells)
        f1 = mpsa.face_forces(weights, b1, cells + shift)
        scale = max(np.abs(f0).max(), 1e-300)
        assert np.abs(f1 - f0).max() <= 1e-12 * max(1.0, scale)


class TestRelaxExtra:
    def test_lambda_to_zero_degenerates_to_standard(self):
        from polyelast.verify import ManufacturedSolution
        mesh = meshgen.twist(meshgen.cartesian(4, 4))
        tiny = 1e-12
        mat = MaterialField.uniform(MU, tiny, mesh.num_cells)
        ex = ManufacturedSolution(MU, tiny)
        boundary = bc.dirichlet_all(mesh)
        relax = mpsa.solve(mpsa.assemble(mesh, mat, ex.body_force, boundary,
                                         variant="relax-extra"))
        base = mpsa.solve(mpsa.assemble(mesh, mat, ex.body_force, boundary,
                                        variant="standard"))
        assert np.abs(relax.pressure).max() <= 1e-10
        assert np.abs(relax.cells - base.cells).max() <= 1e-10 * max(
            1.0, np.abs(base.cells).max()
        )

    def test_pressure_equals_lambda_divergence_for_linear_field(self):
        rng = np.random.default_rng(26)
        mesh = meshgen.cartesian(3, 3)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        field = LinearField(rng.standard_normal((2, 2)), rng.standard_normal(2),
                            MU, LAM)
        boundary = bc.dirichlet_all(mesh, displacement=field.displacement)
        system = mpsa.assemble(mesh, mat, field.body_force, boundary,
                               variant="relax-extra")
        sol = mpsa.solve(system)
        assert_allclose(sol.pressure, LAM * np.trace(field.b), atol=1e-9)


class TestFractures:
    def test_empty_set_identical_system(self):
        mesh = meshgen.cartesian(3, 3)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        boundary = bc.dirichlet_all(mesh)
        a = mpsa.assemble(mesh, mat, None, boundary)
        b = mpsa.assemble(mesh, mat, None, boundary, fracture_faces=frozenset())
        assert (abs(a.matrix - b.matrix)).max() == 0.0

    def test_boundary_face_rejected(self):
        mesh = meshgen.cartesian(3, 3)
        f = int(mesh.boundary_faces[0])
        with pytest.raises(AssemblyError, match="boundary"):
            mpsa.decouple_fracture_faces(mesh, [f])

    def test_vertical_line_splits_sparsity_into_blocks(self):
        mesh = meshgen.cartesian(4, 4)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        frac = [f for f in range(mesh.num_faces)
                if not mesh.is_boundary_face(f)
                and np.allclose(mesh.nodes[mesh.face_nodes[f]][:, 0], 0.5)]
        system = mpsa.assemble(mesh, mat, None, bc.dirichlet_all(mesh),
                               fracture_faces=frozenset(frac))
        import scipy.sparse.csgraph as csgraph
        graph = abs(system.matrix) + abs(system.matrix).T
        # SVD-based local solves leave ~1e-16 dust on structurally-zero
        # couplings; threshold before reading the block structure.
        graph.data[graph.data < 1e-12 * graph.data.max()] = 0.0
        graph.eliminate_zeros()
        n_comp, labels = csgraph.connected_components(graph, directed=False)
        left = {labels[2 * k] for k in range(mesh.num_cells)
                if mesh.cell_centroid[k][0] < 0.5}
        right = {labels[2 * k] for k in range(mesh.num_cells)
                 if mesh.cell_centroid[k][0] > 0.5}
        assert left.isdisjoint(right)

    def test_decoupled_faces_carry_zero_force(self):
        from polyelast.verify import ManufacturedSolution
        mesh = meshgen.cartesian(4, 4)
        mat = MaterialField.uniform(MU, LAM, mesh.num_cells)
        ex = ManufacturedSolution(MU, LAM)
        frac = [f for f in range(mesh.num_faces)
                if not mesh.is_boundary_face(f)
                and np.allclose(mesh.nodes[mesh.face_nodes[f]][:, 0], 0.5)]
        system = mpsa.assemble(mesh, mat, ex.body_force, bc.dirichlet_all(mesh),
                               fracture_faces=frozenset(frac))
        sol = mpsa.solve(system)
        assert np.abs(sol.face_forces[frac]).max() <= 1e-13
