import numpy as np
import pytest

import damkit.numcore as nc
from damkit.numcore import Param, Tensor


def fd_check(build, params, tol=1e-6, h=1e-5):
    """Exhaustive central-difference check of a scalar computation."""
    report = nc.grad_check(build, params, h=h, tol=tol)
    assert report.passed, report.summary()
    return report


def rand_param(name, shape, seed):
    rng = np.random.default_rng(seed)
    return Param(name, rng.normal(size=shape))


class TestOpForwards:
    def test_softmax_uniform(self):
        out = nc.softmax_lastdim(Tensor(np.zeros((1, 4))))
        assert np.allclose(out.data, 0.25)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        out = nc.softmax_lastdim(Tensor(rng.normal(size=(6, 9)) * 10))
        assert np.all(np.abs(out.data.sum(axis=-1) - 1.0) <= 1e-12)

    def test_tanh_at_zero(self):
        assert nc.tanh(Tensor(np.zeros((1, 1)))).data[0, 0] == 0.0

    def test_tanh_derivative_at_zero_is_one(self):
        x = Param("x", np.zeros(()))
        # Build scalar y = tanh(x); backward gives dy/dx.
        y = nc.tanh(x)
        y.backward()
        assert x.grad == pytest.approx(1.0, abs=1e-15)

    def test_layer_norm_pre_affine_stats(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.normal(size=(8, 16)))
        gain = Param("g", np.ones(16))
        bias = Param("b", np.zeros(16))
        out = nc.layer_norm_lastdim(x, gain, bias)
        mean = out.data.mean(axis=-1)
        var = out.data.var(axis=-1)
        assert np.all(np.abs(mean) <= 1e-10)
        assert np.all(np.abs(var - 1.0) <= 1e-6)

    def test_concat_slice_round_trip(self):
        rng = np.random.default_rng(2)
        a = Tensor(rng.normal(size=(3, 4)))
        b = Tensor(rng.normal(size=(5, 4)))
        cat = nc.concat_seq([a, b])
        assert np.array_equal(nc.slice_seq(cat, 0, 3).data, a.data)
        assert np.array_equal(nc.slice_seq(cat, 3, 8).data, b.data)
        cat2 = nc.concat_cols([Tensor(a.data), Tensor(a.data * 2)])
        assert np.array_equal(nc.slice_cols(cat2, 4, 8).data, a.data * 2)

    def test_shape_mismatch_messages_carry_both_shapes(self):
        a = Tensor(np.zeros((2, 3)))
        b = Tensor(np.zeros((4, 5)))
        with pytest.raises(nc.ShapeMismatchError) as exc:
            nc.matmul(a, b)
        assert "(2, 3)" in str(exc.value) and "(4, 5)" in str(exc.value)
        with pytest.raises(nc.ShapeMismatchError) as exc2:
            nc.add(a, b)
        assert "(2, 3)" in str(exc2.value) and "(4, 5)" in str(exc2.value)

    def test_nonfinite_rejected_in_check_mode(self):
        with pytest.raises(nc.NonFiniteError):
            nc.add(Tensor(np.array([[np.inf]])), Tensor(np.array([[1.0]])))

    def test_embedding_out_of_range(self):
        t = Param("t", np.zeros((4, 2)))
        with pytest.raises(nc.ShapeMismatchError):
            nc.embedding_lookup(t, np.array([4]))

    def test_train_mode_uses_float32(self):
        nc.set_mode("train")
        try:
            x = Tensor(np.zeros((2, 2)))
            assert x.data.dtype == np.float32
        finally:
            nc.set_mode("check")


class TestOpGradients:
    """Every op's backward against the central finite-difference oracle."""

    def test_matmul(self):
        a = rand_param("a", (4, 3), 0)
        b = rand_param("b", (3, 5), 1)
        fd_check(lambda: nc.cross_entropy_lastdim(nc.matmul(a, b), np.array([0, 2, 4, 1])), [a, b])

    def test_add_same_shape_and_bias(self):
        a = rand_param("a", (4, 5), 2)
        b = rand_param("b", (4, 5), 3)
        bias = rand_param("bias", (5,), 4)
        fd_check(
            lambda: nc.cross_entropy_lastdim(nc.add(nc.add(a, b), bias), np.array([0, 1, 2, 3])),
            [a, b, bias],
        )

    def test_mul_scalar_python_and_tensor(self):
        a = rand_param("a", (3, 4), 5)
        s = Param("s", np.array(0.7))
        fd_check(
            lambda: nc.cross_entropy_lastdim(nc.mul_scalar(nc.mul_scalar(a, 1.3), s), np.array([0, 1, 2])),
            [a, s],
        )

    def test_tanh_gelu(self):
        a = rand_param("a", (4, 6), 6)
        fd_check(lambda: nc.cross_entropy_lastdim(nc.gelu(nc.tanh(a)), np.array([0, 5, 3, 2])), [a])

    def test_softmax(self):
        a = rand_param("a", (3, 7), 7)
        fd_check(lambda: nc.cross_entropy_lastdim(nc.softmax_lastdim(a), np.array([1, 0, 6])), [a])

    def test_layer_norm(self):
        a = rand_param("a", (5, 8), 8)
        g = rand_param("g", (8,), 9)
        b = rand_param("b", (8,), 10)
        fd_check(
            lambda: nc.cross_entropy_lastdim(nc.layer_norm_lastdim(a, g, b), np.array([0, 1, 2, 3, 4])),
            [a, g, b],
        )

    def test_embedding_lookup(self):
        t = rand_param("t", (6, 5), 11)
        ids = np.array([0, 3, 3, 5])
        fd_check(lambda: nc.cross_entropy_lastdim(nc.embedding_lookup(t, ids), np.array([1, 0, 2, 4])), [t])

    def test_concat_slice_transpose(self):
        a = rand_param("a", (3, 4), 12)
        b = rand_param("b", (2, 4), 13)

        def build():
            cat = nc.concat_seq([a, b])
            sl = nc.slice_seq(cat, 1, 4)
            tr = nc.transpose(sl)
            cols = nc.concat_cols([tr, tr])
            back = nc.slice_cols(cols, 2, 5)
            return nc.cross_entropy_lastdim(back, np.array([0, 1, 2, 0]))

        fd_check(build, [a, b])

    def test_cross_entropy(self):
        a = rand_param("a", (6, 9), 14)
        fd_check(lambda: nc.cross_entropy_lastdim(a, np.array([0, 8, 3, 3, 1, 2])), [a])


class TestGradCheck:
    def test_linear_layer_passes(self):
        w = rand_param("w", (6, 4), 20)
        b = rand_param("b", (4,), 21)
        x = np.random.default_rng(22).normal(size=(5, 6))
        targets = np.array([0, 1, 2, 3, 0])

        def f():
            return nc.cross_entropy_lastdim(nc.add(nc.matmul(nc.constant(x), w), b), targets)

        report = nc.grad_check(f, [w, b], tol=1e-6)
        assert report.passed
        assert {p.name for p in report.params} == {"w", "b"}

    def test_corrupted_backward_fails(self):
        w = rand_param("w", (4, 3), 23)
        x = np.random.default_rng(24).normal(size=(2, 4))

        def wrong_matmul(a, b):
            out = nc.matmul(a, b)
            orig = out._bw

            def bad(g):
                orig(g * 1.01)  # 1% corruption

            return Tensor(out.data, out._parents, bad)

        def f():
            return nc.cross_entropy_lastdim(wrong_matmul(nc.constant(x), w), np.array([0, 1]))

        report = nc.grad_check(f, [w], tol=1e-6)
        assert not report.passed

    def test_nondeterministic_f_rejected(self):
        w = Param("w", np.zeros((1, 2)))
        state = {"n": 0.0}

        def f():
            state["n"] += 1.0
            drift = nc.constant(np.array([[state["n"], 0.0]]))
            return nc.cross_entropy_lastdim(nc.add(w, drift), np.array([0]))

        with pytest.raises(nc.NonDeterministicError):
            nc.grad_check(f, [w])

    def test_entry_subsampling_covers_all_params(self):
        a = rand_param("a", (10, 10), 25)
        b = rand_param("b", (3,), 26)

        def f():
            return nc.cross_entropy_lastdim(
                nc.add(nc.matmul(nc.constant(np.ones((2, 10))), nc.slice_cols(a, 0, 3)), b),
                np.array([0, 1]),
            )

        report = nc.grad_check(f, [a, b], tol=1e-6, max_entries_per_param=5, seed=1)
        by_name = {p.name: p for p in report.params}
        assert by_name["a"].checked == 5 and by_name["a"].total == 100
        assert by_name["b"].checked == 3  # small params are exhaustive
        assert report.passed


class TestOptim:
    def test_sgd_hand_arithmetic(self):
        # one step on f(w) = w^2 at w=1, lr=0.1: w' = 1 - 0.1 * 2 = 0.8
        w = Param("w", np.array(1.0))
        w.grad[...] = 2.0
        nc.sgd_step([w], 0.1)
        assert float(w.data) == pytest.approx(0.8, abs=1e-15)

    def test_zero_grad_is_fixed_point(self):
        w = Param("w", np.array([1.0, -2.0]))
        w.zero_grad()
        before = w.data.copy()
        nc.sgd_step([w], 0.5)
        nc.adam_step([w], 0.5)
        assert np.array_equal(w.data, before)

    def test_adam_quadratic_bowl(self):
        # f(w) = (w - 1)^2 from the origin at lr=0.1 reaches <1e-6 at step 189
        # (deterministic arithmetic; derived by running the loop).
        w = Param("w", np.array(0.0))
        converged_at = None
        for step in range(1, 201):
            w.zero_grad()
            w.grad[...] = 2.0 * (float(w.data) - 1.0)
            nc.adam_step([w], lr=0.1)
            if abs(float(w.data) - 1.0) < 1e-6:
                converged_at = step
                break
        assert converged_at is not None and converged_at <= 200


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(30)
        params = [
            Param("layer.w", rng.normal(size=(4, 3))),
            Param("layer.b", rng.normal(size=(3,))),
            Param("gate", np.array(0.25)),
        ]
        path = tmp_path / "model.ckpt"
        nc.save_checkpoint(path, params)
        stored = nc.load_checkpoint(path)
        assert list(stored) == ["layer.w", "layer.b", "gate"]
        for p in params:
            assert np.array_equal(stored[p.name], p.data)

    def test_magic_enforced(self, tmp_path):
        (tmp_path / "x.ckpt").write_bytes(b"NOTMAGIC" + bytes(16))
        with pytest.raises(nc.CheckpointError):
            nc.load_checkpoint(tmp_path / "x.ckpt")

    def test_load_into_validates_names_and_shapes(self, tmp_path):
        p1 = Param("a", np.zeros((2, 2)))
        nc.save_checkpoint(tmp_path / "a.ckpt", [p1])
        with pytest.raises(nc.CheckpointError):
            nc.load_into([Param("b", np.zeros((2, 2)))], tmp_path / "a.ckpt")
        with pytest.raises(nc.CheckpointError):
            nc.load_into([Param("a", np.zeros((3, 2)))], tmp_path / "a.ckpt")

    def test_deterministic_bytes(self, tmp_path):
        params = [Param("w", np.linspace(0, 1, 12).reshape(3, 4))]
        nc.save_checkpoint(tmp_path / "1.ckpt", params)
        nc.save_checkpoint(tmp_path / "2.ckpt", params)
        assert (tmp_path / "1.ckpt").read_bytes() == (tmp_path / "2.ckpt").read_bytes()
