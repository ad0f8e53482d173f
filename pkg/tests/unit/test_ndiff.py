"""Autodiff tensor, network blocks, Adam and checkpoints."""

import math

import numpy as np
import pytest

from omad.diffusion import ScoreNetwork
from omad.errors import CheckpointError, ConfigError, NonFiniteError, ShapeError
from omad.ndiff import tensor as T
from omad.ndiff.checkpoint import load_checkpoint, manifest_path, save_checkpoint
from omad.ndiff.nn import MLP, BatchNorm, Linear, Parameter, fourier_time_embedding
from omad.ndiff.optim import Adam, global_grad_norm


def random_shape(rng, max_size=8):
    rows = int(rng.integers(1, 5))
    return rows, int(rng.integers(1, max_size // rows + 1))


def away_from_zero(rng, shape):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.3, 2.0, size=shape)


def positive(rng, shape):
    return rng.uniform(0.5, 2.0, size=shape)


def broadcast_partner(rng, shape):
    return shape if rng.random() < 0.5 else (1, shape[1])


def reduction(rng, kind):
    axis = [None, 0, 1][int(rng.integers(0, 3))]
    keepdims = bool(rng.random() < 0.5)
    return lambda a: getattr(a, kind)(axis, keepdims)


# each builder draws inputs of at most 8 elements and returns them with the op under test
OP_CASES = {
    "add": lambda rng, s: ([rng.normal(size=s), rng.normal(size=broadcast_partner(rng, s))], lambda a, b: a + b),
    "sub": lambda rng, s: ([rng.normal(size=s), rng.normal(size=broadcast_partner(rng, s))], lambda a, b: a - b),
    "mul": lambda rng, s: ([rng.normal(size=s), rng.normal(size=broadcast_partner(rng, s))], lambda a, b: a * b),
    "div": lambda rng, s: ([rng.normal(size=s), away_from_zero(rng, broadcast_partner(rng, s))], lambda a, b: a / b),
    "pow": lambda rng, s: ([positive(rng, s)], lambda a, p=float(rng.choice([-1.5, 0.5, 2.0, 3.0])): a ** p),
    "exp": lambda rng, s: ([rng.uniform(-2.0, 2.0, size=s)], T.exp),
    "log": lambda rng, s: ([positive(rng, s)], T.log),
    "sqrt": lambda rng, s: ([positive(rng, s)], T.sqrt),
    "relu": lambda rng, s: ([away_from_zero(rng, s)], T.relu),
    "gelu": lambda rng, s: ([rng.normal(size=s)], T.gelu),
    "clip_min": lambda rng, s: ([away_from_zero(rng, s)], lambda a: T.clip_min(a, 0.0)),
    "softmax": lambda rng, s: ([rng.normal(size=s)], lambda a, ax=int(rng.integers(0, 2)): T.softmax(a, axis=ax)),
    "log_softmax": lambda rng, s: (
        [rng.normal(size=s)], lambda a, ax=int(rng.integers(0, 2)): T.log_softmax(a, axis=ax),
    ),
    "sum": lambda rng, s: ([rng.normal(size=s)], reduction(rng, "sum")),
    "mean": lambda rng, s: ([rng.normal(size=s)], reduction(rng, "mean")),
    "concat": lambda rng, s: (
        [rng.normal(size=s), rng.normal(size=(int(rng.integers(1, 8 // s[1] + 1)), s[1]))],
        lambda a, b: T.concat([a, b], axis=0),
    ),
    "reshape": lambda rng, s: ([rng.normal(size=s)], lambda a: a.reshape(s[0] * s[1], 1)),
    "take": lambda rng, s: ([rng.normal(size=s)], lambda a, i=rng.integers(0, s[0], size=3): a[i]),
}


def matmul_case(rng):
    n = int(rng.integers(1, 5))
    k = int(rng.integers(1, 8 // n + 1))
    m = int(rng.integers(1, 8 // k + 1))
    return [rng.normal(size=(n, k)), rng.normal(size=(k, m))], T.matmul


class TestMlpForward:
    def test_identity_relu_net(self, rng):
        net = MLP([2, 2, 2], "relu", rng, "m")
        for layer in net.layers:
            layer.weight.data[...] = np.eye(2)
            layer.bias.data[...] = 0.0
        out = net(np.array([[1.0, -1.0]]))
        np.testing.assert_array_equal(out.data, [[1.0, 0.0]])

    def test_zero_weights_return_bias(self, rng):
        layer = Linear(3, 2, rng, "l")
        layer.weight.data[...] = 0.0
        layer.bias.data[...] = [0.5, -2.0]
        out = layer(rng.normal(size=(4, 3)))
        np.testing.assert_array_equal(out.data, np.tile([0.5, -2.0], (4, 1)))

    def test_matches_matrix_arithmetic(self, rng):
        net = MLP([2, 3, 1], "relu", rng, "m")
        x = rng.normal(size=(5, 2))
        w0, b0 = net.layers[0].weight.data, net.layers[0].bias.data
        w1, b1 = net.layers[1].weight.data, net.layers[1].bias.data
        expected = np.maximum(x @ w0 + b0, 0.0) @ w1 + b1
        np.testing.assert_allclose(net(x).data, expected, atol=1e-12)

    def test_wrong_input_width(self, rng):
        net = MLP([3, 4, 1], "gelu", rng, "m")
        with pytest.raises(ConfigError):
            net(np.zeros((2, 2)))

    def test_unknown_activation(self, rng):
        with pytest.raises(ConfigError):
            MLP([2, 2], "tanh", rng, "m")


class TestBatchNorm:
    def test_constant_column_normalizes_to_zero(self):
        bn = BatchNorm(2, "bn")
        out = bn(np.array([[3.0, 1.0], [3.0, -1.0]]))
        np.testing.assert_allclose(out.data[:, 0], 0.0, atol=1e-12)

    def test_two_point_batch(self):
        bn = BatchNorm(1, "bn")
        out = bn(np.array([[-1.0], [1.0]]))
        expected = 1.0 / math.sqrt(1.0 + 1e-5)
        np.testing.assert_allclose(out.data[:, 0], [-expected, expected], rtol=1e-12)

    def test_eval_identity_with_unit_statistics(self, rng):
        bn = BatchNorm(3, "bn").eval()
        x = rng.normal(size=(1, 3))
        np.testing.assert_allclose(bn(x).data, x / math.sqrt(1.0 + 1e-5), rtol=1e-12)

    def test_single_row_rejected_in_training(self):
        with pytest.raises(ShapeError):
            BatchNorm(2, "bn")(np.zeros((1, 2)))

    def test_running_statistics_use_momentum(self):
        bn = BatchNorm(1, "bn", momentum=0.9)
        bn(np.array([[1.0], [3.0]]))
        assert bn.running_mean[0] == pytest.approx(0.1 * 2.0)
        assert bn.running_var[0] == pytest.approx(0.9 + 0.1 * 1.0)

    def test_momentum_warmup_ramps_from_half(self):
        bn = BatchNorm(1, "bn", momentum=0.99, warmup_steps=10)
        assert bn.current_momentum() == pytest.approx(0.5)
        for _ in range(5):
            bn(np.array([[0.0], [1.0]]))
        assert bn.current_momentum() == pytest.approx(0.5 + 0.49 * 0.5)
        for _ in range(5):
            bn(np.array([[0.0], [1.0]]))
        assert bn.current_momentum() == pytest.approx(0.99)

    def test_eval_leaves_statistics_alone(self, rng):
        bn = BatchNorm(2, "bn")
        bn(rng.normal(size=(4, 2)))
        before = bn.running_mean.copy(), bn.running_var.copy(), bn.step_count
        bn.eval()(rng.normal(size=(4, 2)))
        np.testing.assert_array_equal(bn.running_mean, before[0])
        np.testing.assert_array_equal(bn.running_var, before[1])
        assert bn.step_count == before[2]

    def test_eval_output_repeats_bitwise(self, rng):
        bn = BatchNorm(3, "bn")
        for _ in range(3):
            bn(rng.normal(size=(5, 3)))
        bn.scale.data[...] = rng.normal(size=3)
        bn.eval()
        x = rng.normal(size=(4, 3))
        np.testing.assert_array_equal(bn(x).data, bn(x.copy()).data)

    def test_deferred_norm_waits_for_commit(self, rng):
        bn = BatchNorm(2, "bn", momentum=0.9, deferred=True)
        x1, x2 = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
        bn(x1)
        bn(x2)
        np.testing.assert_array_equal(bn.running_mean, 0.0)
        np.testing.assert_array_equal(bn.running_var, 1.0)
        assert bn.step_count == 0

        assert bn.commit()
        mean = 0.5 * (x1.mean(axis=0) + x2.mean(axis=0))
        var = 0.5 * (x1.var(axis=0) + x2.var(axis=0))
        np.testing.assert_allclose(bn.running_mean, 0.1 * mean, rtol=1e-12)
        np.testing.assert_allclose(bn.running_var, 0.9 + 0.1 * var, rtol=1e-12)
        assert bn.step_count == 1
        assert not bn.commit()
        assert bn.step_count == 1

    def test_deferred_output_matches_immediate(self, rng):
        x = rng.normal(size=(6, 3))
        eager, deferred = BatchNorm(3, "a"), BatchNorm(3, "b", deferred=True)
        np.testing.assert_array_equal(eager(x).data, deferred(x).data)

    def test_commit_statistics_walks_submodules(self, rng):
        net = ScoreNetwork(2, 1, rng, "agent0.score", hidden=(4,), time_dim=4)
        for h in range(3):
            net(T.Tensor(rng.normal(size=(5, 1))), rng.normal(size=(5, 2)), (h + 1) / 3)
        assert net.input_norm.step_count == 0
        assert net.commit_statistics() == 1
        assert net.input_norm.step_count == 1
        assert net.commit_statistics() == 0


class TestFourierEmbedding:
    def test_time_zero(self):
        emb = fourier_time_embedding(0.0, 8)
        np.testing.assert_array_equal(emb[:4], 0.0)
        np.testing.assert_array_equal(emb[4:], 1.0)

    def test_quarter_period(self):
        np.testing.assert_allclose(fourier_time_embedding(0.25, 2), [1.0, 0.0], atol=1e-12)

    def test_grid_embeddings_distinct(self):
        grid = [fourier_time_embedding(h / 8, 16) for h in range(1, 9)]
        for i in range(8):
            for j in range(i + 1, 8):
                assert not np.allclose(grid[i], grid[j])

    @pytest.mark.parametrize("t, dim", [(0.5, 3), (1.5, 4), (-0.1, 4)])
    def test_preconditions(self, t, dim):
        with pytest.raises(ConfigError):
            fourier_time_embedding(t, dim)


class TestBackward:
    def test_scalar_product(self):
        w = Parameter(np.array(2.0), "w")
        T.backward(w * 3.0)
        assert float(w.grad) == pytest.approx(3.0)

    def test_stop_gradient(self):
        w = Parameter(np.array(1.5), "w")
        T.backward(T.stop_gradient(w) * w)
        assert float(w.grad) == pytest.approx(1.5)

    def test_non_scalar_loss(self):
        w = Parameter(np.ones(3), "w")
        with pytest.raises(ShapeError):
            T.backward(w * 2.0)

    def test_unreachable_parameter_keeps_zero_grad(self):
        used, unused = Parameter(np.ones(2), "a"), Parameter(np.ones(2), "b")
        T.backward((used * used).sum())
        np.testing.assert_array_equal(unused.grad, 0.0)

    def test_no_grad_records_nothing(self):
        w = Parameter(np.ones(2), "w")
        with T.no_grad():
            out = (w * 2.0).sum()
        assert not out.requires_grad

    def test_shared_node_accumulates(self):
        w = Parameter(np.array([1.0, 2.0]), "w")
        y = w * w
        T.backward((y + y).sum())
        np.testing.assert_allclose(w.grad, 4.0 * w.data)

    @pytest.mark.parametrize("activation", ["gelu", "relu"])
    def test_mlp_matches_finite_differences(self, rng, numeric_grad, activation):
        net = MLP([3, 5, 4, 2], activation, rng, "m", hidden_norm=True)
        x = rng.normal(size=(6, 3))

        def loss():
            out = net(x)
            return (out * out).sum()

        net.zero_grad()
        T.backward(loss())
        for p in net.parameters():
            # biases ahead of a batch norm cancel, so their gradient is zero up to rounding
            np.testing.assert_allclose(p.grad, numeric_grad(loss, p), rtol=1e-5, atol=1e-8, err_msg=p.name)

    def test_bias_ahead_of_batch_norm_has_no_gradient(self, rng):
        net = MLP([3, 5, 4, 2], "relu", rng, "m", hidden_norm=True)
        out = net(rng.normal(size=(6, 3)))
        T.backward((out * out).sum())
        for layer in net.layers[:-1]:
            np.testing.assert_allclose(layer.bias.grad, 0.0, atol=1e-10)
        assert np.abs(net.layers[-1].bias.grad).max() > 0.0

    def test_elementwise_ops_match_finite_differences(self, rng, numeric_grad, relative_error):
        w = Parameter(rng.uniform(0.5, 1.5, size=(2, 3)), "w")
        v = Parameter(rng.normal(size=(3,)), "v")

        def loss():
            z = T.exp(w) / (T.sqrt(w) + 1.0) - T.log(w) * v + w ** 3
            z = T.concat([z, T.softmax(z, axis=1), T.log_softmax(z, axis=0)], axis=1)
            return (z.reshape(3, 6)[1:] * 0.3).mean() + T.gelu(v).sum()

        w.zero_grad()
        v.zero_grad()
        T.backward(loss())
        assert relative_error(w.grad, numeric_grad(loss, w)) < 1e-6
        assert relative_error(v.grad, numeric_grad(loss, v)) < 1e-6

    def test_broadcast_gradient_sums_back(self):
        b = Parameter(np.zeros(3), "b")
        x = T.Tensor(np.ones((4, 3)))
        T.backward((x + b).sum())
        np.testing.assert_array_equal(b.grad, [4.0, 4.0, 4.0])

    @pytest.mark.parametrize("op", sorted(OP_CASES) + ["matmul"])
    def test_random_inputs_match_finite_differences(self, rng, numeric_grad, op):
        for trial in range(100):
            arrays, fn = matmul_case(rng) if op == "matmul" else OP_CASES[op](rng, random_shape(rng))
            params = [Parameter(x, f"x{i}") for i, x in enumerate(arrays)]
            weights = rng.normal(size=fn(*params).shape)

            def loss():
                return (fn(*params) * weights).sum()

            T.backward(loss())
            for p in params:
                np.testing.assert_allclose(
                    p.grad, numeric_grad(loss, p), rtol=1e-5, atol=1e-8, err_msg=f"{op}, trial {trial}, {p.name}",
                )


class TestAdam:
    def test_clips_global_norm(self):
        p = Parameter(np.zeros(2), "p")
        opt = Adam([p], lr=0.1, clip_norm=1.0)
        p.grad = np.array([3.0, 4.0])
        norm = opt.step()
        assert norm == pytest.approx(5.0)
        np.testing.assert_allclose(opt.m["p"], 0.5 * np.array([0.6, 0.8]))
        assert opt.t == 1

    def test_first_step_moves_by_learning_rate(self):
        p = Parameter(np.array([1.0, -1.0]), "p")
        opt = Adam([p], lr=0.01, clip_norm=0.0)
        p.grad = np.array([2.0, -0.5])
        opt.step()
        np.testing.assert_allclose(p.data, [1.0 - 0.01, -1.0 + 0.01], rtol=1e-6)

    def test_grads_zeroed_after_step(self):
        p = Parameter(np.ones(3), "p")
        opt = Adam([p], lr=0.01)
        p.grad = np.ones(3)
        opt.step()
        np.testing.assert_array_equal(p.grad, 0.0)

    def test_non_finite_gradient_aborts_update(self):
        p, q = Parameter(np.ones(2), "p"), Parameter(np.ones(2), "q")
        opt = Adam([p, q], lr=0.01)
        p.grad = np.array([np.nan, 1.0])
        q.grad = np.ones(2)
        with pytest.raises(NonFiniteError) as info:
            opt.step()
        assert info.value.diagnostics["parameters"] == ["p"]
        np.testing.assert_array_equal(p.data, 1.0)
        np.testing.assert_array_equal(q.data, 1.0)
        assert opt.t == 0

    def test_duplicate_names_rejected(self):
        with pytest.raises(ConfigError):
            Adam([Parameter(np.ones(1), "x"), Parameter(np.ones(1), "x")], lr=0.1)

    def test_global_norm_is_order_free(self, rng):
        params = [Parameter(np.zeros(4), f"p{i}") for i in range(5)]
        for p in params:
            p.grad = rng.normal(size=4)
        assert global_grad_norm(params) == global_grad_norm(params[::-1])

    def test_registration_order_does_not_matter(self, rng):
        start = {f"p{i}": rng.normal(size=(2, 3)) for i in range(4)}
        grads = [{name: rng.normal(size=(2, 3)) for name in start} for _ in range(5)]
        finals = []
        for order in (sorted(start), sorted(start, reverse=True), ["p2", "p0", "p3", "p1"]):
            params = {name: Parameter(start[name], name) for name in order}
            opt = Adam(list(params.values()), lr=0.05, clip_norm=1.0)
            for step in grads:
                for name, p in params.items():
                    p.grad = step[name].copy()
                opt.step()
            finals.append({name: p.data.copy() for name, p in params.items()})
        for other in finals[1:]:
            for name in start:
                np.testing.assert_array_equal(other[name], finals[0][name])


class TestCheckpoint:
    def test_round_trip_and_manifest(self, tmp_path, rng):
        arrays = {"a.weight": rng.normal(size=(3, 2)), "b.bias": rng.normal(size=(4,)), "s": np.array([2.0])}
        path = save_checkpoint(tmp_path / "x.ckpt", arrays)
        loaded = load_checkpoint(path)
        assert set(loaded) == set(arrays)
        for key in arrays:
            np.testing.assert_array_equal(loaded[key], arrays[key])
        lines = manifest_path(path).read_text().splitlines()
        assert lines == ["a.weight 3x2", "b.bias 4", "s 1"]

    def test_truncated_file(self, tmp_path):
        path = save_checkpoint(tmp_path / "x.ckpt", {"w": np.ones((2, 2))})
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.ckpt"
        path.write_bytes(b"JUNKJUNK")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_trailing_bytes(self, tmp_path):
        path = save_checkpoint(tmp_path / "x.ckpt", {"w": np.ones(2)})
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
