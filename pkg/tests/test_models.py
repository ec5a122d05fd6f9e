import json

import numpy as np
import pytest

from harmonica.errors import ConfigError, ModelOutputError
from harmonica.models import (BuiltinModel, Domain, MlpModel, OutputProjection,
                              builtin, class_probability, curve_arc_length,
                              load_mlp, pixel_domain, predicted_label, project)


class TestBuiltins:
    def test_f1_alternating_signs_cancel(self):
        m = builtin("f1", 4)
        assert m.eval(np.ones(4))[0] == pytest.approx(0.0)
        assert m.eval(np.array([2.0, 1.0, 0.0, 0.0]))[0] == pytest.approx(3.0)

    def test_f2_sum_of_squares(self):
        assert builtin("f2", 4).eval(np.ones(4))[0] == pytest.approx(4.0)

    def test_f3_zero_at_sin_zero(self):
        assert builtin("f3", 2).eval(np.array([0.0, 5.0]))[0] == pytest.approx(0.0)
        got = builtin("f3", 4).eval(np.array([1.0, 2.0, 0.5, 1.5]))[0]
        assert got == pytest.approx(np.sin(1) * np.exp(2) * np.sin(0.5) * np.exp(1.5))

    def test_f4_exp_sum(self):
        assert builtin("f4", 3).eval(np.ones(3))[0] == pytest.approx(np.exp(3.0))

    @pytest.mark.parametrize("name", ["f1", "f3"])
    def test_parity_violation(self, name):
        with pytest.raises(ValueError):
            builtin(name, 3)

    def test_linear_and_constant(self):
        m = builtin("linear", 3, a=[1.0, 2.0, 3.0], b=1.0)
        assert m.eval(np.array([1.0, 1.0, 1.0]))[0] == pytest.approx(7.0)
        assert builtin("constant", 5, c=2.5).eval(np.zeros(5))[0] == 2.5

    def test_step2d_indicator(self):
        m = builtin("step2d", 2, boundary_level=0.5)
        assert m.eval(np.array([0.1, 0.9]))[0] == 1.0
        assert m.eval(np.array([0.1, 0.1]))[0] == 0.0
        out = m.eval_batch(np.random.default_rng(0).random((100, 2)) * 4 - 2)
        assert set(np.unique(out)) <= {0.0, 1.0}

    def test_curve2d_flat_arc_length_is_box_length(self):
        assert curve_arc_length(0.0, 3.0, 0.0, 5.0) == pytest.approx(5.0)

    def test_curve2d_boundary(self):
        m = builtin("curve2d", 2, boundary_level=1.0, amplitude=0.5, omega=2.0)
        x0 = 0.3
        edge = 1.0 + 0.5 * np.sin(2.0 * x0)
        assert m.eval(np.array([x0, edge + 1e-6]))[0] == 1.0
        assert m.eval(np.array([x0, edge - 1e-6]))[0] == 0.0

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            builtin("f9", 2)


class TestMlp:
    def test_identity_single_layer(self):
        m = MlpModel([(np.eye(2), np.zeros(2), "identity")])
        assert np.allclose(m.eval(np.array([0.3, -0.2])), [0.3, -0.2])

    def test_zero_weights_yield_final_bias(self):
        layers = [(np.zeros((4, 3)), np.zeros(4), "relu"),
                  (np.zeros((2, 4)), np.array([1.5, -2.0]), "identity")]
        m = MlpModel(layers)
        assert np.allclose(m.eval(np.array([9.0, 9.0, 9.0])), [1.5, -2.0])

    def test_chain_mismatch_names_layers(self):
        layers = [(np.zeros((100, 2)), np.zeros(100), "relu"),
                  (np.zeros((1, 50)), np.zeros(1), "identity")]
        with pytest.raises(ValueError, match="layer 0.*layer 1"):
            MlpModel(layers)

    def test_activations(self):
        x = np.array([-1.0, 2.0])
        relu = MlpModel([(np.eye(2), np.zeros(2), "relu")])
        assert np.allclose(relu.eval(x), [0.0, 2.0])
        tanh = MlpModel([(np.eye(2), np.zeros(2), "tanh")])
        assert np.allclose(tanh.eval(x), np.tanh(x))
        logistic = MlpModel([(np.eye(2), np.zeros(2), "logistic")])
        assert np.allclose(logistic.eval(x), 1 / (1 + np.exp(-x)))

    def _write(self, tmp_path, doc):
        path = tmp_path / "net.json"
        path.write_text(json.dumps(doc))
        return path

    def test_load_from_file(self, tmp_path):
        doc = {"layers": [
            {"rows": 100, "cols": 2, "weights": [0.01] * 200,
             "bias": [0.0] * 100, "activation": "relu"},
            {"rows": 1, "cols": 100, "weights": [0.1] * 100,
             "bias": [0.5], "activation": "identity"},
        ]}
        m = load_mlp(self._write(tmp_path, doc))
        assert (m.input_dim, m.output_dim) == (2, 1)
        assert m.backend == "mlp"
        got = m.eval(np.array([1.0, 1.0]))[0]
        assert got == pytest.approx(100 * 0.1 * (0.01 * 2) + 0.5)

    def test_load_chain_mismatch(self, tmp_path):
        doc = {"layers": [
            {"rows": 100, "cols": 2, "weights": [0.0] * 200,
             "bias": [0.0] * 100, "activation": "relu"},
            {"rows": 1, "cols": 50, "weights": [0.0] * 50,
             "bias": [0.0], "activation": "identity"},
        ]}
        with pytest.raises(ConfigError, match="layer 0.*layer 1"):
            load_mlp(self._write(tmp_path, doc))

    def test_load_bad_weight_count(self, tmp_path):
        doc = {"layers": [{"rows": 2, "cols": 2, "weights": [1.0, 2.0],
                           "bias": [0.0, 0.0], "activation": "identity"}]}
        with pytest.raises(ConfigError, match="layer 0"):
            load_mlp(self._write(tmp_path, doc))

    def test_load_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="line"):
            load_mlp(path)


class TestDomainAndEval:
    def test_quantized_round_then_clamp(self):
        dom = pixel_domain()
        got = dom.prepare(np.array([[-3.0, 12.4, 12.6, 300.0]]))
        assert np.array_equal(got, [[0.0, 12.0, 13.0, 255.0]])

    def test_bounded_domain_rejects_outside(self):
        m = builtin("f2", 2).with_domain(Domain(lower=0.0, upper=1.0))
        with pytest.raises(ValueError):
            m.eval(np.array([2.0, 0.5]))

    def test_non_finite_output_raises(self):
        m = BuiltinModel(lambda X: np.full((X.shape[0], 1), np.nan), 2, 1)
        with pytest.raises(ModelOutputError):
            m.eval(np.array([-1.0, 0.0]))

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            builtin("f2", 3).eval(np.zeros(4))

    def test_deterministic_eval(self):
        m = builtin("f4", 3)
        x = np.array([0.1, 0.2, 0.3])
        assert np.array_equal(m.eval(x), m.eval(x))


class TestProjection:
    def test_scalar_passthrough(self):
        assert project(np.array([3.2]), OutputProjection("scalar")) == 3.2

    def test_scalar_rejects_multidim(self):
        with pytest.raises(ValueError):
            project(np.array([1.0, 2.0]), OutputProjection("scalar"))

    def test_component(self):
        assert project(np.array([5.0, 7.0]), OutputProjection("component", 1)) == 7.0
        with pytest.raises(ValueError):
            project(np.array([5.0, 7.0]), OutputProjection("component", 9))

    def test_class_logit_uses_anchor_argmax(self):
        proj = OutputProjection("class-logit")
        anchor = np.array([0.1, 2.0, -1.0])
        got = project(np.array([5.0, 7.0, 9.0]), proj, anchor=anchor)
        assert got == 7.0

    def test_class_logit_requires_anchor(self):
        with pytest.raises(ValueError):
            project(np.array([1.0, 2.0]), OutputProjection("class-logit"))

    def test_norm(self):
        assert project(np.array([3.0, 4.0]), OutputProjection("norm")) == 5.0

    def test_resolve_freezes_component(self):
        proj = OutputProjection("class-logit").resolve(np.array([0.0, 9.0, 1.0]))
        assert (proj.mode, proj.index) == ("component", 1)


class TestLabelsAndProbs:
    def test_argmax_label(self):
        assert predicted_label(np.array([0.1, 0.9, 0.3])) == 1

    def test_scalar_threshold_label(self):
        assert predicted_label(np.array([0.9])) == 1
        assert predicted_label(np.array([0.2])) == 0

    def test_class_probability_softmax(self):
        p = class_probability(np.array([1.0, 2.0, 3.0]), 2)
        assert p == pytest.approx(0.66524, abs=1e-5)

    def test_class_probability_scalar(self):
        assert class_probability(np.array([0.8]), 1) == pytest.approx(0.8)
        assert class_probability(np.array([0.8]), 0) == pytest.approx(0.2)
