import numpy as np
import pytest
from numpy.testing import assert_allclose

from polyelast.errors import MaterialError
from polyelast.material import (
    MaterialField,
    from_poisson,
    isotropic_stress,
    strain_to_voigt,
    stress_to_voigt,
    voigt_stiffness,
)


class TestFromPoisson:
    def test_quarter(self):
        mat = from_poisson(1.0, 0.25, 3)
        assert_allclose(mat.lam, 1.0)

    def test_near_incompressible(self):
        mat = from_poisson(1.0, 0.495, 1)
        assert_allclose(mat.lam, 99.0)

    def test_zero(self):
        assert_allclose(from_poisson(1.0, 0.0, 1).lam, 0.0)

    def test_incompressible_rejected(self):
        with pytest.raises(MaterialError):
            from_poisson(1.0, 0.5, 1)

    def test_ratio_identity(self):
        # mu/lam = (1 - 2 nu) / (2 nu)
        for nu in (0.1, 0.3, 0.45):
            mat = from_poisson(2.0, nu, 1)
            assert_allclose(mat.mu[0] / mat.lam[0], (1 - 2 * nu) / (2 * nu))
            assert_allclose(mat.poisson_ratio()[0], nu)


class TestVoigtStiffness:
    def test_lambda_zero(self):
        assert_allclose(voigt_stiffness(1.0, 0.0),
                        np.diag([2.0, 2.0, 1.0]))

    def test_mu_lambda_one(self):
        # entries evaluated by hand from eps_i : C eps_j
        assert_allclose(voigt_stiffness(1.0, 1.0),
                        [[3, 1, 0], [1, 3, 0], [0, 0, 1]])

    def test_matches_tensor_constitutive_law(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            mu = rng.uniform(0.1, 10.0)
            lam = rng.uniform(0.0, 50.0)
            e = rng.standard_normal((2, 2))
            eps = 0.5 * (e + e.T)
            sigma = isotropic_stress(mu, lam, eps)
            voigt = voigt_stiffness(mu, lam) @ strain_to_voigt(eps)
            assert_allclose(voigt, stress_to_voigt(sigma), rtol=1e-14, atol=1e-14)

    def test_energy_positive(self):
        rng = np.random.default_rng(6)
        d = voigt_stiffness(0.7, 2.3)
        for _ in range(50):
            eps = rng.standard_normal(3)
            assert eps @ d @ eps > 0.0

    def test_voigt_product_equals_contraction(self):
        # engineering shear makes eps_voigt . sigma_voigt == eps : sigma
        rng = np.random.default_rng(7)
        for _ in range(20):
            e1 = rng.standard_normal((2, 2))
            eps = 0.5 * (e1 + e1.T)
            sigma = isotropic_stress(1.3, 0.8, eps)
            assert_allclose(strain_to_voigt(eps) @ stress_to_voigt(sigma),
                            np.tensordot(eps, sigma), rtol=1e-14)


class TestMaterialField:
    def test_validation(self):
        with pytest.raises(MaterialError):
            MaterialField([0.0], [1.0])
        with pytest.raises(MaterialError):
            MaterialField([1.0], [-0.1])
        with pytest.raises(MaterialError):
            MaterialField([1.0, 2.0], [1.0])

    def test_stiffest_eigenvalue(self):
        mat = MaterialField([1.0, 2.0], [3.0, 0.0])
        assert_allclose(mat.stiffest_eigenvalue(), [8.0, 4.0])
