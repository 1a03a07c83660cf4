import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfc_imex.errors import ContractViolation, StructuralError
from pfc_imex.tableau import (SHIPPED, ImexTableau, build_certification_matrices, certify,
                              eig_symmetric, interlaces, load_tableau, order_residuals,
                              symmetrize, tableau_from_dict, validate_tableau)

# lambda_min values of the shipped pairs, frozen when the coefficients were fixed.
FROZEN_LAMBDA = {
    "euler1": (1.0, 1.0),
    "imex2": (1.0, 0.2971263515298521),
    "imex43": (1.0, 0.05088900041928235),
}


def cofactor_inverse(M):
    """Dense inverse via the adjugate; independent of forward substitution."""
    n = M.shape[0]
    det = np.linalg.det(M)
    adj = np.empty_like(M)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(M, i, axis=0), j, axis=1)
            adj[j, i] = (-1) ** (i + j) * (np.linalg.det(minor) if n > 1 else 1.0)
    return adj / det


def random_tableau(rng, s):
    A = np.tril(rng.uniform(-0.5, 1.0, (s, s)))
    A[np.diag_indices(s)] = rng.uniform(0.3, 1.2, s)
    Ah = np.tril(rng.uniform(-0.5, 1.0, (s, s)))
    Ah[np.diag_indices(s)] = rng.uniform(0.3, 1.2, s)
    # match row sums of Ahat to those of A through the diagonal
    Ah[np.diag_indices(s)] += A.sum(1) - Ah.sum(1)
    return ImexTableau(A, Ah, A.sum(1), 1, "random")


class TestValidation:
    def test_euler_passes(self, euler1):
        report = validate_tableau(euler1)
        assert report.passed
        assert report["ahat_invertible"].residual == 1.0

    def test_singular_ahat(self):
        report = validate_tableau(ImexTableau([[1.0]], [[0.0]], [1.0], 1))
        assert not report.passed
        assert report["ahat_invertible"].message == "Â not invertible"

    def test_perturbed_abscissa(self, imex43):
        c = imex43.c.copy()
        c[1] += 1e-6
        report = validate_tableau(ImexTableau(imex43.A, imex43.Ahat, c, 3))
        cond = report["row_sum_consistency"]
        assert not cond.passed
        assert cond.residual == pytest.approx(1e-6, rel=1e-6)

    def test_not_stiffly_accurate(self):
        A = [[0.5, 0.0], [0.25, 0.5]]
        report = validate_tableau(ImexTableau(A, A, [0.5, 0.75], 1))
        assert not report["stiff_accuracy"].passed

    def test_shape_mismatch(self):
        with pytest.raises(StructuralError):
            ImexTableau(np.eye(2), np.eye(3), [1, 1], 1)
        with pytest.raises(StructuralError):
            ImexTableau(np.eye(2), np.eye(2), [1, 1, 1], 1)

    def test_arrays_read_only(self, euler1):
        with pytest.raises(ValueError):
            euler1.A[0, 0] = 2.0


class TestFiles:
    def test_shipped_load(self):
        for name in SHIPPED:
            tab = load_tableau(name)
            assert tab.name == name
            assert validate_tableau(tab).passed

    @pytest.mark.parametrize("name", SHIPPED)
    def test_shipped_declared_order(self, name):
        tab = load_tableau(name)
        residuals = order_residuals(tab)
        assert max(abs(v) for v in residuals.values()) < 1e-13

    def test_imex43_shape(self, imex43):
        assert imex43.declared_order == 3 and imex43.s == 4

    def test_round_trip(self, tmp_path, imex43):
        path = tmp_path / "t.json"
        path.write_text(json.dumps(imex43.to_dict()))
        back = load_tableau(path)
        np.testing.assert_array_equal(back.A, imex43.A)
        np.testing.assert_array_equal(back.Ahat, imex43.Ahat)

    def test_upper_entries_rejected(self):
        data = {"s": 2, "A": [[1, 1e-30], [0, 1]], "Ahat": [[1, 0], [0, 1]], "c": [1, 1], "order": 1}
        with pytest.raises(StructuralError, match=r"A\[0\]\[1\]"):
            tableau_from_dict(data)

    def test_unknown_key(self):
        data = {"s": 1, "A": [[1]], "Ahat": [[1]], "c": [1], "order": 1, "weights": [1]}
        with pytest.raises(StructuralError, match="weights"):
            tableau_from_dict(data)

    def test_bad_json_has_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "s": 1,\n  "A": [[1]\n}')
        with pytest.raises(StructuralError, match="line 4"):
            load_tableau(path)


class TestMatrices:
    def test_s1_hand_values(self, euler1):
        Q, H0, H1, H2 = build_certification_matrices(euler1, 0.3, 2.0, 1.5)
        assert Q.tolist() == [[1.0]]
        assert H0.tolist() == [[1.0]]
        assert H1[0, 0] == pytest.approx(2.0 - 0.75)
        assert H2[0, 0] == pytest.approx(0.3 + 0.5)

    def test_h1_is_beta_q_at_zero_lip(self, imex43):
        Q, _, H1, _ = build_certification_matrices(imex43, 0.0, 1.7, 0.0)
        np.testing.assert_allclose(H1, 1.7 * Q, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("s", [1, 2, 3, 4])
    def test_cofactor_oracle(self, rng, s):
        for _ in range(5):
            tab = random_tableau(rng, s)
            Q, H0, _, _ = build_certification_matrices(tab, 0.0, 0.0, 0.0)
            inv = cofactor_inverse(np.array(tab.Ahat))
            EL = np.tril(np.ones((s, s)))
            np.testing.assert_allclose(Q, (inv @ tab.A - np.eye(s)) @ EL + np.eye(s), atol=1e-12)
            np.testing.assert_allclose(H0, inv @ EL, atol=1e-12)

    def test_closed_forms(self, imex43, rng):
        for _ in range(10):
            alpha, beta, lip = rng.uniform(0, 3, 3)
            Q, _, H1, H2 = build_certification_matrices(imex43, alpha, beta, lip)
            Qb = symmetrize(Q)
            np.testing.assert_allclose(symmetrize(H1), beta * Qb - lip / 2 * np.eye(4), atol=1e-12)
            np.testing.assert_allclose(symmetrize(H2), (alpha + 1) * Qb - 0.5 * np.eye(4), atol=1e-12)


class TestSymmetrizeAndEig:
    def test_symmetrize(self, rng):
        assert symmetrize([[0, 2], [0, 0]]).tolist() == [[0, 1], [1, 0]]
        S = symmetrize(rng.normal(size=(4, 4)))
        np.testing.assert_array_equal(symmetrize(S), S)
        M = rng.normal(size=(5, 5))
        np.testing.assert_allclose(symmetrize(M) + 0.5 * (M - M.T), M, atol=1e-15)

    def test_small_cases(self):
        np.testing.assert_allclose(eig_symmetric(np.diag([3.0, 1.0, 2.0])), [1, 2, 3])
        np.testing.assert_allclose(eig_symmetric([[2.0, 1.0], [1.0, 2.0]]), [1, 3], atol=1e-15)
        assert eig_symmetric(np.zeros((3, 3))).tolist() == [0, 0, 0]

    def test_identities(self, rng):
        for _ in range(20):
            M = symmetrize(rng.normal(size=(6, 6)))
            lam = eig_symmetric(M)
            assert np.all(np.diff(lam) >= 0)
            assert math.isclose(lam.sum(), np.trace(M), rel_tol=1e-10, abs_tol=1e-10)
            assert math.isclose(np.prod(lam), np.linalg.det(M), rel_tol=1e-10, abs_tol=1e-12)
            np.testing.assert_allclose(lam, np.linalg.eigvalsh(M), atol=1e-12)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ContractViolation):
            eig_symmetric([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ContractViolation):
            eig_symmetric(np.ones((2, 3)))

    def test_diagonal_interlacing(self):
        assert interlaces([1.0, 2.0, 3.0], [1.0, 2.0])
        assert not interlaces([1.0, 2.0, 3.0], [0.5, 2.0])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=10, max_size=10))
    def test_property_interlacing(self, entries):
        M = np.zeros((4, 4))
        M[np.tril_indices(4)] = entries
        M = M + np.tril(M, -1).T
        full = eig_symmetric(M)
        for m in range(1, 5):
            assert interlaces(full, eig_symmetric(M[:m, :m]), tol=1e-10 * max(1.0, np.abs(M).max()))


class TestCertify:
    def test_euler(self, euler1):
        cert = certify(euler1, 0.0, 1.0, 1.2)
        assert cert.admissible
        assert cert.alpha_min == -0.5
        assert cert.beta_min == pytest.approx(0.6)

    def test_euler_beta_too_small(self, euler1):
        cert = certify(euler1, 0.0, 0.5, 1.2)
        assert not cert.admissible
        assert "β below β_min" in cert.reason

    def test_alpha_too_small(self, imex43):
        cert = certify(imex43, -0.9, 1.0, 0.1)
        assert not cert.admissible and "α below α_min" in cert.reason

    def test_indefinite_q_never_raises(self):
        # s = 1 gives Q = a11 / ahat11 = -1
        cert = certify(ImexTableau([[1.0]], [[-1.0]], [1.0], 1), 0.0, 1.0, 1.0)
        assert not cert.admissible
        assert "Qbar is not positive-definite" in cert.reason
        assert math.isinf(cert.beta_min)

    @pytest.mark.parametrize("name", SHIPPED)
    def test_shipped_defaults(self, name):
        # alpha = 0, beta = 1 with the Lipschitz constant of m0 = 0.5 (L = 0.724)
        cert = certify(load_tableau(name), 0.0, 1.0, 0.724)
        assert cert.admissible, cert.reason
        lq, lh = FROZEN_LAMBDA[name]
        assert cert.lambda_min_Qbar == pytest.approx(lq, abs=1e-12)
        assert cert.lambda_min_H0bar == pytest.approx(lh, abs=1e-12)
        assert all(all(v) for v in cert.submatrix_pd.values())
        assert cert.interlacing_ok

    def test_boundary_is_admissible(self, imex43):
        cert = certify(imex43, 0.0, 1.0, 0.724)
        at_min = certify(imex43, cert.alpha_min, cert.beta_min, 0.724)
        assert at_min.admissible, at_min.reason

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-0.5, 5), st.floats(0, 5), st.floats(0, 3), st.floats(0, 3))
    def test_monotone(self, alpha, beta, da, db):
        tab = load_tableau("imex43")
        if certify(tab, alpha, beta, 1.0).admissible:
            assert certify(tab, alpha + da, beta + db, 1.0).admissible

    def test_to_dict_serializable(self, imex43):
        json.dumps(certify(imex43, 0.0, 1.0, 0.5).to_dict())

    def test_infinite_lipschitz(self, imex43):
        cert = certify(imex43, 0.0, 1e6, math.inf)
        assert not cert.admissible
        assert cert.reason == "β below β_min"
        assert cert.submatrix_pd["H1"] == [False] * 4
        json.dumps(cert.to_dict(), allow_nan=True)
