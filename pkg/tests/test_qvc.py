import numpy as np
import pytest

from ampforge import qvc
from ampforge.errors import DimensionMismatch, EmptyBatch
from ampforge.qvc import Ansatz, QvcModel, TrainConfig
from ampforge.simulator import Observable
from conftest import haar_state


def random_batch(n_qubits, size, rng, n_classes=2):
    return [(haar_state(n_qubits, rng), int(rng.integers(n_classes)))
            for _ in range(size)]


class TestAnsatz:
    def test_parameter_count(self):
        assert Ansatz(5, 3).n_params == 30

    def test_circuit_structure(self):
        c = Ansatz(3, 2).circuit(np.zeros(12))
        kinds = [g.kind for g in c.gates]
        assert kinds.count("cnot") == 4
        assert kinds.count("ry") == kinds.count("rz") == 6

    def test_wrong_parameter_count_rejected(self):
        with pytest.raises(DimensionMismatch):
            Ansatz(3, 2).circuit(np.zeros(5))


class TestPredict:
    def test_zero_layer_reads_input_directly(self):
        model = QvcModel(Ansatz(3, 0), np.zeros(0),
                         qvc.default_observables(2, 3))
        v = np.zeros(8, dtype=complex)
        v[0] = 1.0
        label, exps, probs = qvc.predict(model, v)
        assert label == 0
        assert exps[0] == pytest.approx(1.0)
        assert exps[1] == pytest.approx(-1.0)

    def test_probabilities_normalized(self, rng):
        model = qvc.new_model(Ansatz(4, 2), 2, seed=0)
        for _ in range(5):
            _, _, probs = qvc.predict(model, haar_state(4, rng))
            assert abs(probs.sum() - 1) < 1e-12
            assert np.all(probs > 0)

    def test_softmax_shift_invariance(self, rng):
        e = rng.standard_normal(4)
        assert np.allclose(qvc.softmax(e), qvc.softmax(e + 17.3), atol=1e-12)
        assert np.argmax(e) == np.argmax(e + 17.3)

    def test_dimension_guard(self, rng):
        model = qvc.new_model(Ansatz(3, 1), 2, seed=0)
        with pytest.raises(DimensionMismatch):
            qvc.predict(model, haar_state(4, rng))


class TestLoss:
    def test_uniform_probabilities_give_log_m(self):
        model = QvcModel(Ansatz(1, 0), np.zeros(0),
                         qvc.default_observables(2, 1))
        plus = np.array([1, 1]) / np.sqrt(2)  # <Z> = 0 -> uniform softmax
        assert qvc.loss(model, [(plus, 0)]) == pytest.approx(np.log(2))

    def test_confident_model_loss_vanishes(self):
        # Scaled readout pushes softmax toward certainty on |0>.
        model = QvcModel(Ansatz(1, 0), np.zeros(0),
                         [Observable("zstring", (0,), scale=40.0),
                          Observable("zstring", (0,), scale=-40.0)])
        zero = np.array([1, 0], dtype=complex)
        assert qvc.loss(model, [(zero, 0)]) < 1e-10

    def test_matches_scalar_recompute(self, rng):
        model = qvc.new_model(Ansatz(3, 2), 2, seed=1)
        batch = random_batch(3, 6, rng)
        total = 0.0
        for x, y in batch:
            _, _, probs = qvc.predict(model, x)
            total -= np.log(probs[y])
        assert qvc.loss(model, batch) == pytest.approx(total / len(batch))

    def test_empty_batch_rejected(self, rng):
        model = qvc.new_model(Ansatz(2, 1), 2, seed=0)
        with pytest.raises(EmptyBatch):
            qvc.loss(model, [])


class TestGradient:
    def test_zero_at_symmetric_point(self):
        model = QvcModel(Ansatz(3, 1), np.zeros(6),
                         qvc.default_observables(2, 3))
        zero = np.zeros(8, dtype=complex)
        zero[0] = 1.0
        g = qvc.gradient(model, [(zero, 0)])
        assert np.max(np.abs(g)) < 1e-12

    def test_matches_finite_differences(self, rng):
        model = qvc.new_model(Ansatz(4, 2), 2, seed=5)
        batch = random_batch(4, 4, rng)
        g = qvc.gradient(model, batch)
        h = 1e-5
        for t in range(model.theta.size):
            tp, tm = model.theta.copy(), model.theta.copy()
            tp[t] += h
            tm[t] -= h
            fd = (qvc.loss(QvcModel(model.ansatz, tp, model.observables), batch)
                  - qvc.loss(QvcModel(model.ansatz, tm, model.observables), batch)) / (2 * h)
            assert abs(g[t] - fd) <= 1e-6

    def test_single_parameter_closed_form(self):
        # <Z> of RY(theta)|0> is cos(theta); the shift rule gives -sin(theta).
        ansatz = Ansatz(1, 1)
        obs = [Observable("zstring", (0,))]
        zero = np.array([1, 0], dtype=complex)
        theta = np.array([np.pi / 3, 0.0])
        model = QvcModel(ansatz, theta, obs)
        states = qvc._states_matrix([zero])
        shifted_plus = theta.copy()
        shifted_plus[0] += np.pi / 2
        shifted_minus = theta.copy()
        shifted_minus[0] -= np.pi / 2
        derivative = (qvc.batch_expectations(model, states, shifted_plus)
                      - qvc.batch_expectations(model, states, shifted_minus))[0, 0] / 2
        assert derivative == pytest.approx(-np.sin(np.pi / 3), abs=1e-12)
        base = qvc.batch_expectations(model, states)[0, 0]
        assert base == pytest.approx(np.cos(np.pi / 3), abs=1e-12)


class TestTrain:
    def test_separable_single_qubit_task(self):
        zero = np.array([1, 0], dtype=complex)
        one = np.array([0, 1], dtype=complex)
        dataset = [(zero, 0), (one, 1)] * 4
        model = qvc.new_model(Ansatz(1, 1), 2, seed=0)
        model, history = qvc.train(model, dataset,
                                   TrainConfig(epochs=50, batch_size=4, seed=0))
        assert history[-1][2] == 1.0

    def test_seeded_determinism(self, rng):
        dataset = random_batch(3, 10, rng)
        cfg = TrainConfig(epochs=3, batch_size=4, seed=42)
        m1, h1 = qvc.train(qvc.new_model(Ansatz(3, 1), 2, seed=9), dataset, cfg)
        m2, h2 = qvc.train(qvc.new_model(Ansatz(3, 1), 2, seed=9), dataset, cfg)
        assert h1 == h2
        assert np.array_equal(m1.theta, m2.theta)

    def test_label_validation(self, rng):
        model = qvc.new_model(Ansatz(2, 1), 2, seed=0)
        with pytest.raises(DimensionMismatch):
            qvc.train(model, [(haar_state(2, rng), 5)], TrainConfig(epochs=1))

    def test_adam_state_advances(self, rng):
        dataset = random_batch(2, 6, rng)
        model = qvc.new_model(Ansatz(2, 1), 2, seed=0)
        trained, _ = qvc.train(model, dataset, TrainConfig(epochs=2, batch_size=3, seed=0))
        assert trained.adam_step == 4
        assert model.adam_step == 0  # input model untouched


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path, rng):
        model = qvc.new_model(Ansatz(4, 3), 2, seed=11)
        model.adam_m += 0.25
        model.adam_step = 7
        path = tmp_path / "model.json"
        qvc.save_checkpoint(model, path, extra={"encoding": "mps:0.6"})
        back = qvc.load_checkpoint(path)
        assert np.array_equal(back.theta, model.theta)
        assert np.array_equal(back.adam_m, model.adam_m)
        assert back.adam_step == 7
        assert back.ansatz == model.ansatz
        assert back.observables == model.observables


def test_multiclass_observables():
    obs = qvc.default_observables(4, 6)
    assert [o.qubits for o in obs] == [(0,), (1,), (2,), (3,)]
    with pytest.raises(DimensionMismatch):
        qvc.default_observables(4, 3)
