import numpy as np
import pytest

from qsann.ansatz import AnsatzSpec, ParamVector, build_circuit
from qsann.attention import (
    AttentionMatrix,
    NoisyEngine,
    ObservableSet,
    PureEngine,
    QsalLayerParams,
    gpqsa_coefficients,
    layer_forward,
    make_engine,
    query_key_expectations,
    value_matrix,
    value_vector,
)
from qsann.errors import ConfigurationError, EmptySequenceError
from qsann.sim import (
    Gate,
    NoiseChannel,
    PauliString,
    circuit_unitary,
    init_zero_state,
    pauli_matrix,
)


def zero_layer(n=2, enc_depth=1, qkv_depth=1):
    return QsalLayerParams.create(n, enc_depth, qkv_depth)


def random_layer(rng, n=2, enc_depth=1, qkv_depth=1):
    return QsalLayerParams.create(n, enc_depth, qkv_depth, rng=rng, std=0.5)


class TestLayerParams:
    def test_sizes(self):
        layer = zero_layer(2, 1, 1)
        assert layer.input_dim == 6
        assert layer.theta_q.values.shape == (6,)

    def test_mismatched_vectors_rejected(self):
        good = ParamVector(AnsatzSpec(2, 1), np.zeros(6))
        bad = ParamVector(AnsatzSpec(2, 2), np.zeros(8))
        with pytest.raises(ConfigurationError):
            QsalLayerParams(2, 1, 1, good, good, bad)


class TestObservableSet:
    def test_default_singles_order_n2(self):
        obs = ObservableSet.default(2, 6)
        assert [str(o) for o in obs.observables] == ["ZI", "IZ", "XI", "IX", "YI", "IY"]

    def test_default_pairs_n4_d24(self):
        obs = ObservableSet.default(4, 24)
        names = [str(o) for o in obs.observables]
        assert names[:12] == [
            "ZIII", "IZII", "IIZI", "IIIZ",
            "XIII", "IXII", "IIXI", "IIIX",
            "YIII", "IYII", "IIYI", "IIIY",
        ]
        assert names[12:16] == ["ZZII", "IZZI", "IIZZ", "ZIIZ"]
        assert names[16:20] == ["XXII", "IXXI", "IIXX", "XIIX"]
        assert names[20:24] == ["YYII", "IYYI", "IIYY", "YIIY"]

    def test_default_pairs_deduplicate_n2(self):
        obs = ObservableSet.default(2, 8)
        names = [str(o) for o in obs.observables]
        assert names == ["ZI", "IZ", "XI", "IX", "YI", "IY", "ZZ", "XX"]

    def test_too_many_requested(self):
        with pytest.raises(ConfigurationError):
            ObservableSet.default(1, 4)

    def test_wrong_head_rejected(self):
        with pytest.raises(ConfigurationError):
            ObservableSet((PauliString.from_str("XI"), PauliString.from_str("IZ")))


class TestQueryKey:
    def test_zero_parameters_give_zero_projection(self):
        # theta = 0, x = 0: the state stays an equal superposition, <Z_1> = 0
        layer = zero_layer()
        zq, zk = query_key_expectations(np.zeros((3, 6)), layer)
        assert np.allclose(zq, 0.0, atol=1e-12)
        assert np.allclose(zk, 0.0, atol=1e-12)

    def test_matches_full_matrix_oracle(self, rng):
        layer = random_layer(rng)
        x = rng.uniform(-1, 1, 6)
        zq, zk = query_key_expectations(x, layer)
        gates = [Gate("H", 0), Gate("H", 1)] + build_circuit(layer.enc_spec, x)
        psi = circuit_unitary(gates, 2) @ init_zero_state(2).amplitudes
        uq = circuit_unitary(build_circuit(layer.qkv_spec, layer.theta_q.values), 2)
        z1 = pauli_matrix(PauliString.from_str("ZI"))
        oracle = np.real(psi.conj() @ uq.conj().T @ z1 @ uq @ psi)
        assert zq[0] == pytest.approx(oracle, abs=1e-10)

    def test_bounded(self, rng):
        layer = random_layer(rng)
        xs = rng.uniform(-6, 6, (100, 6))
        zq, zk = query_key_expectations(xs, layer)
        assert np.all(np.abs(zq) <= 1.0) and np.all(np.abs(zk) <= 1.0)

    def test_identical_inputs_identical_outputs(self, rng):
        layer = random_layer(rng)
        xs = np.tile(rng.uniform(-1, 1, 6), (4, 1))
        zq, zk = query_key_expectations(xs, layer)
        assert np.all(zq == zq[0]) and np.all(zk == zk[0])

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            query_key_expectations(np.zeros((2, 5)), zero_layer())


class TestValues:
    def test_output_dimension_n4(self, rng):
        layer = random_layer(rng, n=4)
        obs = ObservableSet.default(4, 12)
        out = value_vector(rng.uniform(-1, 1, 12), layer, obs)
        assert out.shape == (12,)

    def test_entries_bounded(self, rng):
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        values = value_matrix(rng.uniform(-6, 6, (50, 6)), layer, obs)
        assert np.all(np.abs(values) <= 1.0)

    def test_zero_angles_z_entries_vanish(self):
        layer = zero_layer()
        obs = ObservableSet.default(2, 6)
        out = value_vector(np.zeros(6), layer, obs)
        assert np.allclose(out[:2], 0.0, atol=1e-12)  # Z singles on |+..+>


class TestGpqsa:
    def test_equal_projections_uniform(self):
        attn = gpqsa_coefficients(np.array([0.3, 0.3]), np.array([0.3, 0.3]))
        assert np.allclose(attn.coefficients, 0.5)

    def test_unit_distance_ratio(self):
        # raw coefficients 1 and e^-1; check the normalized ratio
        attn = gpqsa_coefficients(np.array([0.0]), np.array([0.0]))
        assert attn.coefficients[0, 0] == 1.0
        att2 = gpqsa_coefficients(np.array([0.0, 0.0]), np.array([0.0, 1.0]))
        expected = np.exp(-1.0)
        assert att2.coefficients[0, 1] / att2.coefficients[0, 0] == pytest.approx(
            expected, abs=1e-12
        )
        assert expected == pytest.approx(0.367879, abs=1e-6)

    def test_single_position(self):
        attn = gpqsa_coefficients(np.array([0.7]), np.array([-0.2]))
        assert attn.coefficients.tolist() == [[1.0]]

    def test_empty_rejected(self):
        with pytest.raises(EmptySequenceError):
            gpqsa_coefficients(np.array([]), np.array([]))

    def test_rows_stochastic_and_positive(self, rng):
        for _ in range(200):
            s = int(rng.integers(1, 9))
            attn = gpqsa_coefficients(rng.uniform(-1, 1, s), rng.uniform(-1, 1, s))
            coeff = attn.coefficients
            assert np.max(np.abs(coeff.sum(axis=1) - 1.0)) < 1e-10
            assert np.all(coeff > 0.0) and np.all(coeff <= 1.0)


class TestAttentionMatrixType:
    def test_rejects_bad_rows(self):
        with pytest.raises(ConfigurationError):
            AttentionMatrix(np.array([[0.6, 0.6], [0.5, 0.5]]))
        with pytest.raises(ConfigurationError):
            AttentionMatrix(np.array([[1.0, 0.0], [0.5, 0.5]]))  # zero entry


class TestLayerForward:
    def test_single_word_residual(self, rng):
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        x = rng.uniform(-1, 1, 6)
        outputs, attn = layer_forward(x, layer, obs)
        assert attn.coefficients.tolist() == [[1.0]]
        expected = x + value_vector(x, layer, obs)
        assert np.allclose(outputs[0], expected, atol=1e-12)

    def test_shapes(self, rng):
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        outputs, attn = layer_forward(rng.uniform(-1, 1, (5, 6)), layer, obs)
        assert outputs.shape == (5, 6)
        assert attn.coefficients.shape == (5, 5)

    def test_output_bound(self, rng):
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        xs = rng.uniform(-3, 3, (6, 6))
        outputs, _ = layer_forward(xs, layer, obs)
        assert np.all(np.abs(outputs) <= np.abs(xs) + 1.0 + 1e-12)

    def test_permutation_equivariance(self, rng):
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        xs = rng.uniform(-1, 1, (4, 6))
        perm = rng.permutation(4)
        out_a, attn_a = layer_forward(xs, layer, obs)
        out_b, attn_b = layer_forward(xs[perm], layer, obs)
        assert np.allclose(out_b, out_a[perm], atol=1e-12)
        assert np.allclose(
            attn_b.coefficients, attn_a.coefficients[np.ix_(perm, perm)], atol=1e-12
        )

    def test_deterministic(self, rng):
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        xs = rng.uniform(-1, 1, (3, 6))
        out_a, _ = layer_forward(xs, layer, obs)
        out_b, _ = layer_forward(xs, layer, obs)
        assert np.array_equal(out_a, out_b)

    def test_residual_identity_with_zero_values(self, rng, monkeypatch):
        # forcing the measured value vectors to zero must give y = x exactly
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        xs = rng.uniform(-1, 1, (3, 6))
        monkeypatch.setattr(
            PureEngine,
            "expect_set",
            lambda self, states, obs_set: np.zeros((states.shape[0], obs_set.size)),
        )
        outputs, _ = layer_forward(xs, layer, obs)
        assert np.array_equal(outputs, xs)

    def test_observable_count_must_match(self, rng):
        layer = random_layer(rng)
        with pytest.raises(ConfigurationError):
            layer_forward(np.zeros((2, 6)), layer, ObservableSet.default(2, 5))

    def test_empty_sequence(self):
        with pytest.raises(EmptySequenceError):
            layer_forward(np.zeros((0, 6)), zero_layer(), ObservableSet.default(2, 6))


class TestNoisyLayer:
    def test_p_zero_short_circuits_to_pure(self, rng):
        assert isinstance(make_engine(2, NoiseChannel("depolarizing", 0.0)), PureEngine)
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        xs = rng.uniform(-1, 1, (3, 6))
        clean, _ = layer_forward(xs, layer, obs)
        zeroed, _ = layer_forward(xs, layer, obs, noise=NoiseChannel("depolarizing", 0.0))
        assert np.array_equal(clean, zeroed)

    def test_noisy_engine_selected(self):
        assert isinstance(
            make_engine(2, NoiseChannel("amplitude_damping", 0.2)), NoisyEngine
        )

    def test_noisy_rows_still_stochastic(self, rng):
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        xs = rng.uniform(-1, 1, (4, 6))
        for kind in ("depolarizing", "amplitude_damping"):
            outputs, attn = layer_forward(xs, layer, obs, noise=NoiseChannel(kind, 0.75))
            assert np.max(np.abs(attn.coefficients.sum(axis=1) - 1.0)) < 1e-10
            assert np.all(np.isfinite(outputs))

    def test_pure_and_noisy_agree_without_noise(self, rng):
        # density-matrix engine with a p=0 channel object forced in
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        xs = rng.uniform(-1, 1, (3, 6))
        engine = NoisyEngine(2, NoiseChannel("depolarizing", 0.0))
        encoded = engine.prepare(xs, layer.enc_spec)
        values = engine.expect_set(
            engine.apply(encoded, layer.qkv_spec, layer.theta_v.values), obs
        )
        assert np.allclose(values, value_matrix(xs, layer, obs), atol=1e-10)

    def test_depolarizing_shrinks_projections(self, rng):
        layer = random_layer(rng)
        xs = rng.uniform(-1, 1, (3, 6))
        zq_clean, _ = query_key_expectations(xs, layer)
        zq_noisy, _ = query_key_expectations(
            xs, layer, noise=NoiseChannel("depolarizing", 0.75)
        )
        assert np.max(np.abs(zq_noisy)) <= np.max(np.abs(zq_clean)) + 1e-12


class TestShotSampling:
    def test_sampled_layer_runs_and_differs(self, rng):
        layer = random_layer(rng)
        obs = ObservableSet.default(2, 6)
        xs = rng.uniform(-1, 1, (3, 6))
        exact, _ = layer_forward(xs, layer, obs)
        sampled, attn = layer_forward(
            xs, layer, obs, shots=64, rng=np.random.default_rng(0)
        )
        assert np.max(np.abs(attn.coefficients.sum(axis=1) - 1.0)) < 1e-10
        assert not np.array_equal(exact, sampled)

    def test_shots_need_rng(self, rng):
        layer = random_layer(rng)
        with pytest.raises(ConfigurationError):
            query_key_expectations(np.zeros((1, 6)), layer, shots=16)
