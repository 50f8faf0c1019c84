import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csmlab import csm
from csmlab import linalg as la
from csmlab.csm import Context, Modality
from csmlab.errors import ShapeError, ValidationError
from csmlab.rng import RngStream

Z = Context.computational(2, labels=[(1,), (-1,)], name="Z")
X = Context.from_vectors([[1, 1], [1, -1]], labels=[(1,), (-1,)], name="X")


def ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


class TestContext:
    def test_rejects_non_orthogonal(self):
        with pytest.raises(ValidationError):
            Context.from_vectors([[1, 0], [1, 1]])

    def test_labels_distinct_and_counted(self):
        with pytest.raises(ValidationError):
            Context.computational(2, labels=[(1,), (1,)])
        with pytest.raises(ValidationError):
            Context.computational(3, labels=[(1,), (2,)])

    def test_modality_value(self):
        m = Z.modality(1)
        assert m.value == (-1.0,)
        with pytest.raises(ShapeError):
            Modality(Z, 2)

    def test_observable(self):
        np.testing.assert_allclose(X.observable(), la.PAULI_X, atol=1e-15)

    def test_tuple_labels(self):
        ctx = Context.computational(4, labels=[(0, 0), (0, 1), (1, 0), (1, 1)])
        np.testing.assert_allclose(ctx.observable(1), np.diag([0, 1, 0, 1]))


class TestBornProbability:
    def test_zero_to_plus(self):
        assert csm.born_probability(Z.modality(0), X.modality(0)) == pytest.approx(0.5)

    def test_same_modality(self):
        assert csm.born_probability(X.modality(1), X.modality(1)) == pytest.approx(1.0)

    def test_rotated_basis(self):
        # rotating the basis by π/3 on the Bloch sphere tilts the ray by π/6
        rotated = csm.transform_context(Z, ry(math.pi / 3))
        p = csm.born_probability(Z.modality(0), rotated.modality(0))
        assert p == pytest.approx(math.cos(math.pi / 6) ** 2, abs=1e-12)
        assert p == pytest.approx(0.75, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            csm.born_probability(Z.modality(0), Context.computational(3).modality(0))

    def test_normalization_and_unitary_invariance(self):
        gen = np.random.default_rng(4)
        for _ in range(50):
            d = int(gen.integers(2, 9))
            a = csm.random_context(d, RngStream(int(gen.integers(2**32))))
            b = csm.random_context(d, RngStream(int(gen.integers(2**32))))
            m = a.modality(int(gen.integers(d)))
            total = sum(csm.born_probability(m, t) for t in b.modalities)
            assert abs(total - 1) <= la.TOL_ALG
            u = la.random_unitary(d, gen)
            ua, ub = csm.transform_context(a, u), csm.transform_context(b, u)
            for i in range(d):
                p1 = csm.born_probability(m, b.modality(i))
                p2 = csm.born_probability(ua.modality(m.index), ub.modality(i))
                assert abs(p1 - p2) <= la.TOL_ALG


class TestMeasure:
    def test_basis_state_is_certain(self):
        ctx = csm.random_context(5, 9)
        for i in range(5):
            rec = csm.measure(ctx.vector(i), ctx, RngStream(i))
            assert rec.index == i
            assert rec.probability == pytest.approx(1.0)

    def test_record_contents(self):
        rng = RngStream(12)
        rec = csm.measure(la.ket([1, 1]), Z, rng)
        assert rec.value == Z.labels[rec.index]
        np.testing.assert_array_equal(rec.post_state, Z.vector(rec.index))
        assert rec.rng_state["position"] == 0 and rec.rng_state["position_after"] == 1
        assert 0 <= rec.probability <= 1
        assert rec.modality.context is Z

    def test_repeatability(self):
        rng = RngStream(1)
        ctx = csm.random_context(4, rng)
        first = csm.measure(la.random_state(4, rng.generator), ctx, rng)
        post = first.post_state
        same = 0
        for _ in range(10_000):
            rec = csm.measure(post, ctx, rng)
            same += rec.index == first.index
            post = rec.post_state
        assert same == 10_000

    def test_plus_in_z_frequency(self):
        n = 100_000
        rng = RngStream(2024)
        idx = csm.sample_outcomes(la.ket([1, 1]), Z, n, rng)
        freq0 = np.mean(idx == 0)
        assert abs(freq0 - 0.5) <= 4 * math.sqrt(0.25 / n)

    def test_sample_outcomes_matches_measure_stream(self):
        state = la.random_state(6, np.random.default_rng(0))
        ctx = csm.random_context(6, 3)
        batch = csm.sample_outcomes(state, ctx, 50, RngStream(77))
        rng = RngStream(77)
        singles = [csm.measure(state, ctx, rng).index for _ in range(50)]
        assert list(batch) == singles

    def test_reproducible_from_record(self):
        rng = RngStream(5)
        for _ in range(3):
            csm.measure(la.ket([1, 1j]), Z, rng)
        rec = csm.measure(la.ket([1, 1j]), Z, rng)
        replay = RngStream(rec.rng_state["seed"], tuple(rec.rng_state["spawn_key"]), rec.rng_state["position"])
        assert csm.measure(la.ket([1, 1j]), Z, replay).index == rec.index

    def test_unnormalized_rejected(self):
        with pytest.raises(ValidationError):
            csm.measure(np.array([1.0, 1.0]), Z, 0)

    def test_lueders_measurement(self):
        p_low = la.Projector.from_vectors(np.eye(3)[:2])
        p_high = la.Projector.from_vectors(np.eye(3)[2:])
        state = la.ket([1, 1, 1])
        rec = csm.measure_projective(state, [p_low, p_high], RngStream(0))
        expected = [1 / math.sqrt(2), 1 / math.sqrt(2), 0] if rec.index == 0 else [0, 0, 1]
        np.testing.assert_allclose(rec.post_state, expected, atol=1e-15)
        assert rec.probability == pytest.approx(2 / 3 if rec.index == 0 else 1 / 3)


class TestTransformContext:
    def test_identity(self):
        ctx = csm.random_context(3, 1)
        np.testing.assert_array_equal(csm.transform_context(ctx, np.eye(3)).basis, ctx.basis)

    def test_hadamard_maps_z_to_x(self):
        hz = csm.transform_context(Z, la.HADAMARD)
        for i in range(2):
            assert csm.extravalent(hz.modality(i), X.modality(i))
        assert hz.labels == Z.labels

    def test_random_unitary_image_is_valid(self):
        gen = np.random.default_rng(6)
        ctx = csm.random_context(6, 2)
        img = csm.transform_context(ctx, la.random_unitary(6, gen))
        assert la.validate_projector_family(img.projectors, 6).ok

    def test_non_unitary_rejected(self):
        with pytest.raises(ValidationError):
            csm.transform_context(Z, np.array([[1, 1], [0, 1]]))

    def test_group_structure(self):
        gen = np.random.default_rng(9)
        a, b = la.random_unitary(3, gen), la.random_unitary(3, gen)
        ctx = Context.computational(3)
        left = csm.transform_context(csm.transform_context(ctx, a), b)
        right = csm.transform_context(ctx, b @ a)
        np.testing.assert_allclose(left.basis, right.basis, atol=1e-14)
        back = csm.transform_context(csm.transform_context(ctx, a), a.conj().T)
        np.testing.assert_allclose(back.basis, ctx.basis, atol=1e-14)


class TestExtravalence:
    s = 1 / math.sqrt(2)
    C1 = Context.computational(3, name="C1")
    C2 = Context.from_vectors([[1, 0, 0], [0, s, s], [0, s, -s]], name="C2")

    def test_shared_ray(self):
        assert csm.extravalent(self.C1.modality(0), self.C2.modality(0))
        assert not csm.extravalent(self.C1.modality(1), self.C2.modality(1))

    def test_phase_invariance(self):
        phased = Context(np.diag([np.exp(0.7j), 1, 1]))
        assert csm.extravalent(phased.modality(0), self.C1.modality(0))

    def test_zero_vs_plus(self):
        assert not csm.extravalent(Z.modality(0), X.modality(0))

    def test_equal_magnitude_pivot_is_phase_stable(self):
        gen = np.random.default_rng(1)
        plus = X.vector(0)
        for phi in gen.uniform(0, 2 * np.pi, 50):
            assert csm.canonical_ray(np.exp(1j * phi) * plus) == csm.canonical_ray(plus)

    def test_classes_partition(self):
        mods = list(self.C1.modalities) + list(self.C2.modalities)
        classes = csm.extravalence_classes(mods)
        assert sorted(len(c.members) for c in classes) == [1, 1, 1, 1, 2]
        assert sum(len(c.members) for c in classes) == len(mods)
        for c in classes:
            for m in c.members:
                np.testing.assert_allclose(m.projector.matrix, c.representative.matrix, atol=la.TOL_ALG)

    @staticmethod
    def context_with_ray(v, phase, gen):
        q = np.linalg.qr(np.column_stack([v, gen.standard_normal((v.size, v.size - 1))]))[0]
        q[:, 0] = np.exp(1j * phase) * v
        return Context(q)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), phases=st.lists(st.floats(0, 6.28), min_size=3, max_size=3))
    def test_equivalence_relation(self, seed, phases):
        gen = np.random.default_rng(seed)
        v = la.random_state(4, gen)
        ms = [self.context_with_ray(v, ph, gen).modality(0) for ph in phases]
        ms.append(csm.random_context(4, seed).modality(0))
        for a in ms:
            assert csm.extravalent(a, a)
            for b in ms:
                assert csm.extravalent(a, b) == csm.extravalent(b, a)
                for c in ms:
                    if csm.extravalent(a, b) and csm.extravalent(b, c):
                        assert csm.extravalent(a, c)
        assert all(csm.extravalent(ms[0], m) for m in ms[1:3])


class TestCertaintyTransfer:
    def test_shared_ray(self):
        got = csm.certainty_transfer(TestExtravalence.C1.modality(0), TestExtravalence.C2)
        assert got is not None and got.index == 0

    def test_absent(self):
        assert csm.certainty_transfer(Z.modality(0), X) is None

    def test_plant_and_recover(self):
        gen = np.random.default_rng(21)
        for trial in range(30):
            d = int(gen.integers(2, 8))
            ray = la.random_state(d, gen)
            rest = np.linalg.qr(np.column_stack([ray, gen.standard_normal((d, d - 1))]))[0]
            a_basis = rest.copy()
            a_basis[:, 0] = ray
            # second context: same ray at a random slot, other vectors rotated in the complement
            comp = rest[:, 1:] @ la.random_unitary(d - 1, gen)
            slot = int(gen.integers(d))
            b_cols = list(comp.T)
            b_cols.insert(slot, ray * np.exp(1j * gen.uniform(0, 6.28)))
            a, b = Context(a_basis), Context(np.column_stack(b_cols))
            got = csm.certainty_transfer(a.modality(0), b)
            assert got is not None and got.index == slot
            assert csm.extravalent(got, a.modality(0))

    def test_iff_extravalent(self):
        gen = np.random.default_rng(3)
        for _ in range(30):
            a, b = csm.random_context(3, int(gen.integers(1e9))), csm.random_context(3, int(gen.integers(1e9)))
            for m in a.modalities:
                found = csm.certainty_transfer(m, b) is not None
                assert found == any(csm.extravalent(m, t) for t in b.modalities)


class TestExclusivity:
    def test_full_context(self):
        rep = csm.assert_exclusivity_bound(csm.random_context(5, 1), RngStream(2), 100)
        assert rep.passed and rep.max_residual <= 1e-10

    def test_missing_vector_leaves_room(self):
        ctx = csm.random_context(5, 1)
        rows = ctx.basis.T[:4]
        v = csm.orthogonal_completion(rows, RngStream(0))
        assert v is not None
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert np.max(np.abs(rows.conj() @ v)) <= 1e-12
        assert csm.orthogonal_completion(ctx.basis.T, RngStream(0)) is None

    def test_plus_against_computational(self):
        r = csm.gram_schmidt_residual(np.eye(2, dtype=complex), la.ket([1, 1]))
        assert np.linalg.norm(r) <= 1e-16
