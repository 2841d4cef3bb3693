from __future__ import annotations

import numpy as np
import pytest

from senticast.errors import ConfigError, ShapeError, TrainingError
from senticast.nn import (
    GatedResidualNetwork,
    LstmCell,
    LstmEncoder,
    MultiHeadAttention,
    Parameter,
    SwigluFF,
    Tensor,
    VariableSelection,
    adam_step,
    causal_mask,
    gradcheck,
    lstm_step,
    rmsnorm,
    swiglu_ff,
    variable_selection,
)
from senticast.nn.layers import LayerNorm, Linear, dropout


def zero_params(block) -> None:
    for p in block.parameters():
        p.data[...] = 0.0


class TestRmsNorm:
    def test_uniform_vector_normalizes_to_ones(self):
        out = rmsnorm(Tensor([3.0, 3.0, 3.0]), Tensor([1.0, 1.0, 1.0]))
        assert np.allclose(out.data, 1.0)

    def test_zero_input_stays_zero(self):
        out = rmsnorm(Tensor([0.0, 0.0]), Tensor([1.0, 1.0]))
        assert np.array_equal(out.data, [0.0, 0.0])

    def test_hand_case(self):
        out = rmsnorm(Tensor([1.0, -1.0]), Tensor([2.0, 2.0]))
        assert np.allclose(out.data, [2.0, -2.0], atol=1e-7)

    def test_scale_invariance_above_epsilon(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=8) + 2.0
        gain = rng.normal(size=8)
        base = rmsnorm(Tensor(x), Tensor(gain)).data
        for c in (3.0, 17.5, 400.0):
            scaled = rmsnorm(Tensor(c * x), Tensor(gain)).data
            assert np.allclose(scaled, base, atol=1e-9)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            rmsnorm(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))

    def test_gradcheck_over_seeds(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            x = Parameter(rng.normal(size=6), "x")
            gain = Parameter(rng.normal(size=6), "gain")
            report = gradcheck(lambda: (rmsnorm(x, gain) ** 2).sum(), [x, gain])
            assert report.passed, (seed, report.summary())


class TestSwiglu:
    def test_zero_input_zero_output_both_variants(self):
        rng = np.random.default_rng(1)
        w1 = Tensor(rng.normal(size=(4, 6)))
        w2 = Tensor(rng.normal(size=(4, 6)))
        w3 = Tensor(rng.normal(size=(6, 2)))
        x = Tensor(np.zeros((1, 4)))
        for variant in ("swiglu", "relu"):
            assert np.array_equal(swiglu_ff(x, w1, w2, w3, variant).data, np.zeros((1, 2)))

    def test_scalar_silu_value(self):
        one = Tensor(np.ones((1, 1)))
        out = swiglu_ff(one, one, one, one, "swiglu")
        assert out.data[0, 0] == pytest.approx(0.731059, abs=1e-6)

    def test_relu_cutoff(self):
        x = Tensor(np.ones((1, 3)))
        w1 = Tensor(-np.ones((3, 5)))  # all pre-activations negative
        w3 = Tensor(np.ones((5, 2)))
        out = swiglu_ff(x, w1, w1, w3, "relu")
        assert np.array_equal(out.data, np.zeros((1, 2)))

    def test_unknown_variant(self):
        t = Tensor(np.ones((1, 1)))
        with pytest.raises(ShapeError):
            swiglu_ff(t, t, t, t, "gelu")

    def test_gradcheck_both_variants(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            block_s = SwigluFF(4, 6, 3, "swiglu", "ffs", rng)
            block_r = SwigluFF(4, 6, 3, "relu", "ffr", rng)
            x = Parameter(rng.normal(size=(2, 4)), "x")
            for block in (block_s, block_r):
                report = gradcheck(lambda: (block(x) ** 2).sum(), [x] + block.parameters())
                assert report.passed, (seed, block.variant, report.summary())


class TestGrn:
    def test_zero_weights_reduce_to_normed_input(self):
        rng = np.random.default_rng(2)
        for norm_type in ("rmsnorm", "layernorm"):
            grn = GatedResidualNetwork(4, 4, 4, "grn", rng, norm_type=norm_type)
            zero_params(grn)
            x = Tensor(rng.normal(size=(3, 4)))
            out = grn(x)
            expected = grn.norm(x)
            # gain is zeroed too, so both sides are the zero vector
            assert np.array_equal(out.data, expected.data)
            assert np.array_equal(out.data, np.zeros((3, 4)))

    def test_context_free_path_well_defined(self):
        rng = np.random.default_rng(3)
        grn = GatedResidualNetwork(5, 8, 5, "grn", rng)
        out = grn(Tensor(rng.normal(size=(2, 5))))
        assert out.shape == (2, 5)
        assert np.isfinite(out.data).all()

    @pytest.mark.parametrize("hidden", [4, 8, 16])
    def test_output_shape_matches_input(self, hidden):
        rng = np.random.default_rng(4)
        grn = GatedResidualNetwork(hidden, hidden, hidden, "grn", rng)
        out = grn(Tensor(rng.normal(size=(3, hidden))))
        assert out.shape == (3, hidden)

    def test_projected_residual_when_dims_differ(self):
        rng = np.random.default_rng(5)
        grn = GatedResidualNetwork(6, 8, 3, "grn", rng)
        out = grn(Tensor(rng.normal(size=(2, 6))))
        assert out.shape == (2, 3)

    def test_context_requires_projection(self):
        rng = np.random.default_rng(6)
        grn = GatedResidualNetwork(4, 4, 4, "grn", rng)
        with pytest.raises(ShapeError):
            grn(Tensor(np.ones((1, 4))), Tensor(np.ones((1, 4))))

    def test_ff_variant_rejects_context(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ConfigError):
            GatedResidualNetwork(4, 4, 4, "grn", rng, d_context=4, ff_variant="swiglu")

    def test_gradcheck_with_context_and_ff_variants(self):
        # A normalized output has constant squared sum under unit gain, so
        # project onto fixed random coefficients to get a non-degenerate loss.
        for seed in range(10):
            rng = np.random.default_rng(seed)
            grn = GatedResidualNetwork(4, 6, 4, "grn", rng, d_context=3)
            x = Parameter(rng.normal(size=(2, 4)), "x")
            ctx = Parameter(rng.normal(size=(2, 3)), "ctx")
            coeff = Tensor(rng.normal(size=(2, 4)))
            report = gradcheck(lambda: (grn(x, ctx) * coeff).sum(), [x, ctx] + grn.parameters())
            assert report.passed, (seed, report.summary())
        for variant in ("swiglu", "relu"):
            rng = np.random.default_rng(100)
            grn = GatedResidualNetwork(4, 6, 4, "grn", rng, ff_variant=variant)
            x = Parameter(np.random.default_rng(101).normal(size=(2, 4)), "x")
            coeff = Tensor(np.random.default_rng(102).normal(size=(2, 4)))
            report = gradcheck(lambda: (grn(x) * coeff).sum(), [x] + grn.parameters())
            assert report.passed, (variant, report.summary())


class TestLstm:
    def test_zero_parameters_force_half_gates(self):
        rng = np.random.default_rng(8)
        cell = LstmCell(3, 4, "cell", rng)
        zero_params(cell)
        c0 = np.asarray([[0.4, -0.8, 1.2, 0.0]])
        h, c = lstm_step(Tensor(np.ones((1, 3))), Tensor(np.zeros((1, 4))), Tensor(c0), cell)
        assert np.allclose(c.data, 0.5 * c0)
        assert np.allclose(h.data, 0.5 * np.tanh(0.5 * c0))

    def test_zero_state_zero_params_stays_zero(self):
        rng = np.random.default_rng(9)
        cell = LstmCell(2, 3, "cell", rng)
        zero_params(cell)
        h, c = cell.step(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 3))))
        assert np.array_equal(h.data, np.zeros((1, 3)))
        assert np.array_equal(c.data, np.zeros((1, 3)))

    def test_hidden_state_bounded_by_one(self):
        rng = np.random.default_rng(10)
        cell = LstmCell(4, 6, "cell", rng)
        h = Tensor(np.zeros((5, 6)))
        c = Tensor(np.zeros((5, 6)))
        for _ in range(30):
            h, c = cell.step(Tensor(rng.normal(size=(5, 4)) * 3), h, c)
        assert np.all(np.abs(h.data) < 1.0)

    def test_shape_mismatch(self):
        rng = np.random.default_rng(11)
        cell = LstmCell(3, 4, "cell", rng)
        with pytest.raises(ShapeError):
            cell.step(Tensor(np.ones((1, 2))), Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))))

    def test_gradcheck_over_seeds(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            cell = LstmCell(3, 4, "cell", rng)
            x = Parameter(rng.normal(size=(2, 3)), "x")
            h0 = Parameter(rng.normal(size=(2, 4)), "h0")
            c0 = Parameter(rng.normal(size=(2, 4)), "c0")

            def f():
                h, c = cell.step(x, h0, c0)
                return (h * h).sum() + c.sum()

            report = gradcheck(f, [x, h0, c0] + cell.parameters())
            assert report.passed, (seed, report.summary())

    def test_stacked_encoder_shapes(self):
        rng = np.random.default_rng(12)
        enc = LstmEncoder(5, 7, layers=2, name="enc", rng=rng)
        out = enc(Tensor(rng.normal(size=(3, 6, 5))))
        assert out.shape == (3, 6, 7)


class TestAttention:
    def test_identical_keys_average_values(self):
        rng = np.random.default_rng(13)
        mha = MultiHeadAttention(8, 2, "attn", rng)
        queries = Tensor(rng.normal(size=(1, 4, 8)))
        keys = Tensor(np.tile(rng.normal(size=(1, 1, 8)), (1, 4, 1)))
        values = Tensor(rng.normal(size=(1, 4, 8)))
        out, weights = mha(queries, keys, values, return_weights=True)
        assert np.allclose(weights.data, 0.25, atol=1e-12)
        # every output row is the out-projected mean of the projected values
        mean_v = mha.proj_v(values).data.mean(axis=1, keepdims=True)
        expected = mha.proj_out(Tensor(np.tile(mean_v, (1, 4, 1)))).data
        assert np.allclose(out.data, expected, atol=1e-12)

    def test_causal_first_position_attends_to_itself(self):
        rng = np.random.default_rng(14)
        mha = MultiHeadAttention(8, 4, "attn", rng)
        x = Tensor(rng.normal(size=(2, 5, 8)))
        _, weights = mha(x, x, x, mask=causal_mask(5), return_weights=True)
        first_row = weights.data[:, :, 0, :]
        assert np.allclose(first_row[..., 0], 1.0, atol=1e-12)
        assert np.allclose(first_row[..., 1:], 0.0, atol=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(15)
        mha = MultiHeadAttention(6, 3, "attn", rng)
        x = Tensor(rng.normal(size=(3, 7, 6)))
        _, weights = mha(x, x, x, mask=causal_mask(7), return_weights=True)
        assert np.allclose(weights.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_head_divisibility_enforced(self):
        with pytest.raises(ConfigError):
            MultiHeadAttention(6, 4, "attn", np.random.default_rng(0))

    def test_two_dim_inputs_round_trip(self):
        rng = np.random.default_rng(16)
        mha = MultiHeadAttention(8, 2, "attn", rng)
        x = Tensor(rng.normal(size=(5, 8)))
        out = mha(x, x, x)
        assert out.shape == (5, 8)

    def test_gradcheck_over_seeds(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            mha = MultiHeadAttention(8, 2, "attn", rng)
            x = Parameter(rng.normal(size=(2, 4, 8)), "x")
            report = gradcheck(
                lambda: (mha(x, x, x, mask=causal_mask(4)) ** 2).sum(), [x] + mha.parameters()
            )
            assert report.passed, (seed, report.summary())


class TestVariableSelection:
    def test_single_variable_gets_unit_weight(self):
        rng = np.random.default_rng(17)
        vsn = VariableSelection(1, 4, 6, "vsn", rng)
        var = Tensor(rng.normal(size=(3, 4)))
        combined, weights = variable_selection(vsn, [var])
        assert np.allclose(weights.data, 1.0, atol=1e-12)
        expected = vsn.var_grns[0](var)
        assert np.allclose(combined.data, expected.data, atol=1e-12)

    def test_zero_logits_give_uniform_weights(self):
        rng = np.random.default_rng(18)
        vsn = VariableSelection(4, 3, 6, "vsn", rng)
        zero_params(vsn.flat_grn)
        variables = [Tensor(rng.normal(size=(2, 3))) for _ in range(4)]
        _, weights = vsn(variables)
        assert np.allclose(weights.data, 0.25, atol=1e-12)

    def test_weights_form_a_simplex(self):
        rng = np.random.default_rng(19)
        vsn = VariableSelection(5, 3, 6, "vsn", rng)
        variables = [Tensor(rng.normal(size=(4, 3))) for _ in range(5)]
        _, weights = vsn(variables)
        assert np.all(weights.data >= 0.0)
        assert np.allclose(weights.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_zero_variables_rejected(self):
        with pytest.raises(ConfigError):
            VariableSelection(0, 3, 6, "vsn", np.random.default_rng(0))

    def test_gradcheck(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            vsn = VariableSelection(3, 3, 4, "vsn", rng, d_context=4)
            variables = [Parameter(rng.normal(size=(2, 3)), f"v{i}") for i in range(3)]
            ctx = Parameter(rng.normal(size=(2, 4)), "ctx")

            def f():
                combined, _ = vsn(variables, ctx)
                return (combined * combined).sum()

            report = gradcheck(f, variables + [ctx] + vsn.parameters())
            assert report.passed, (seed, report.summary())


class TestAdam:
    def test_first_step_moves_by_lr_times_sign(self):
        p = Parameter(np.asarray([1.0, -2.0, 3.0]), "p")
        p.grad = np.asarray([0.5, -0.25, 1.5])
        adam_step([p], lr=0.01)
        # bias-corrected first step is lr * g / (|g| + eps)
        assert np.allclose(p.data, [1.0 - 0.01, -2.0 + 0.01, 3.0 - 0.01], atol=1e-6)
        assert p.adam_step == 1

    def test_zero_gradient_fresh_state_is_noop(self):
        p = Parameter(np.asarray([1.0, 2.0]), "p")
        p.grad = np.zeros(2)
        adam_step([p], lr=0.1)
        assert np.array_equal(p.data, [1.0, 2.0])

    def test_identical_replicas_stay_bitwise_equal(self):
        rng = np.random.default_rng(20)
        grads = [rng.normal(size=4) for _ in range(5)]
        a = Parameter(np.ones(4), "a")
        b = Parameter(np.ones(4), "b")
        for g in grads:
            a.grad = g.copy()
            b.grad = g.copy()
            adam_step([a], lr=0.05)
            adam_step([b], lr=0.05)
        assert np.array_equal(a.data, b.data)

    def test_nonfinite_gradient_names_parameter(self):
        p = Parameter(np.ones(2), "layer.weight")
        p.grad = np.asarray([np.nan, 0.0])
        with pytest.raises(TrainingError, match="layer.weight"):
            adam_step([p], lr=0.1)


class TestGradcheckHarness:
    def test_quadratic_matches_to_1e9(self):
        theta = Parameter(np.asarray([0.3, -1.2, 2.0]), "theta")
        report = gradcheck(lambda: (theta * theta).sum(), [theta], delta=1e-5)
        assert report.max_rel_err < 1e-9

    def test_rmsnorm_composition(self):
        rng = np.random.default_rng(21)
        x = Parameter(rng.normal(size=4), "x")
        gain = Parameter(np.ones(4), "gain")
        report = gradcheck(lambda: rmsnorm(x, gain).sum(), [x, gain])
        assert report.max_rel_err < 1e-4

    def test_report_flags_mismatches_instead_of_raising(self):
        x = Parameter(np.asarray([1.0]), "x")
        calls = {"n": 0}

        def inconsistent():
            calls["n"] += 1
            scale = 1.0 if calls["n"] == 1 else 2.0  # backward sees 1, differences see 2
            return (x * scale).sum()

        report = gradcheck(inconsistent, [x])
        assert not report.passed
        assert report.failures == ["x"]


class TestNormsAndDropout:
    def test_layernorm_centers_and_scales(self):
        rng = np.random.default_rng(22)
        norm = LayerNorm(6, "ln")
        x = Tensor(rng.normal(size=(4, 6)) * 3 + 5)
        out = norm(x)
        assert np.allclose(out.data.mean(axis=-1), 0.0, atol=1e-7)
        assert np.allclose(out.data.std(axis=-1), 1.0, atol=1e-3)

    def test_dropout_is_inverted_and_seeded(self):
        x = Tensor(np.ones((100, 10)))
        out1 = dropout(x, 0.4, np.random.default_rng(7))
        out2 = dropout(x, 0.4, np.random.default_rng(7))
        assert np.array_equal(out1.data, out2.data)
        kept = out1.data != 0
        assert np.allclose(out1.data[kept], 1.0 / 0.6)
        assert abs(kept.mean() - 0.6) < 0.05

    def test_zero_rate_is_identity(self):
        x = Tensor(np.ones((3, 3)))
        assert dropout(x, 0.0, np.random.default_rng(0)) is x

    def test_linear_bias_off_origin(self):
        rng = np.random.default_rng(23)
        lin = Linear(1, 8, "proj", rng)
        assert np.linalg.norm(lin.bias.data) > 0.1
