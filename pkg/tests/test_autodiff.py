import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourway.nn import (ParamStore, PlateauScheduler, Tape, adam_step,
                        backward, grad_check, load_params, lr_schedule,
                        save_params)
from fourway.nn.optim import ADAM_EPS
from fourway.nn.tensor import (Tensor, add, concat, conv3x3, dropout, flatten,
                               linear, mean_all, mul, relu, scalar_mul,
                               slice_cols, sub, sum_all, take_rows,
                               tensor_abs, tensor_exp)


class TestForwardOps:
    def test_linear_identity(self):
        x = Tensor(np.random.default_rng(0).normal(size=(4, 3)))
        w = Tensor(np.eye(3))
        b = Tensor(np.zeros(3))
        out = linear(x, w, b, None)
        assert np.array_equal(out.data, x.data)

    def test_relu_definition(self):
        out = relu(Tensor([-1.0, 0.0, 2.0]), None)
        assert np.array_equal(out.data, [0.0, 0.0, 2.0])

    def test_dropout_eval_identity(self):
        x = Tensor(np.random.default_rng(1).normal(size=(5, 7)))
        out = dropout(x, 0.5, None, train=False, tape=None)
        assert out is x

    def test_dropout_train_expectation(self):
        # inverted dropout keeps the expectation: mean over 1e5 masks
        x = np.full((100_000, 4), 0.8)
        rng = np.random.default_rng(2)
        out = dropout(Tensor(x), 0.5, rng, train=True, tape=None)
        means = out.data.mean(axis=0)
        assert np.all(np.abs(means - 0.8) / 0.8 < 0.01)

    def test_dropout_train_needs_rng(self):
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(3)), 0.5, None, train=True, tape=None)

    def test_shape_mismatch_messages(self):
        a, b = Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5)))
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 5\)"):
            add(a, b, None)
        with pytest.raises(ValueError, match=r"\(2, 3\)"):
            linear(a, Tensor(np.zeros((7, 2))), Tensor(np.zeros(2)), None)

    def test_conv_shape_validation(self):
        x = Tensor(np.zeros((1, 3, 8, 8)))
        with pytest.raises(ValueError, match="channel mismatch"):
            conv3x3(x, Tensor(np.zeros((4, 5, 3, 3))), Tensor(np.zeros(4)),
                    1, None)

    def test_conv_output_shape(self):
        x = Tensor(np.zeros((2, 3, 48, 48)))
        w = Tensor(np.zeros((7, 3, 3, 3)))
        out = conv3x3(x, w, Tensor(np.zeros(7)), 2, None)
        assert out.shape == (2, 7, 24, 24)

    def test_concat_and_flatten(self):
        a = Tensor(np.ones((2, 3)))
        b = Tensor(np.zeros((2, 2)))
        out = concat([a, b], None)
        assert out.shape == (2, 5)
        f = flatten(Tensor(np.ones((2, 3, 4))), None)
        assert f.shape == (2, 12)

    def test_finite_outputs_on_finite_inputs(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.normal(size=(3, 6)) * 100)
        w = Tensor(rng.normal(size=(6, 4)))
        out = relu(linear(x, w, Tensor(np.zeros(4)), None), None)
        assert np.all(np.isfinite(out.data))


class TestBackward:
    def test_linear_case_grad_equals_input(self):
        x = np.array([[1.0, -2.0, 3.0]])
        store = ParamStore()
        w = store.add("w", np.zeros((3, 1)))
        tape = Tape()
        out = linear(Tensor(x, constant=True), w, store.add("b", np.zeros(1)),
                     tape)
        loss = sum_all(out, tape)
        backward(tape, loss)
        grads = store.collect_grads()
        assert np.array_equal(grads["w"], x.T)

    def test_relu_grad_zero_at_negative(self):
        store = ParamStore()
        w = store.add("w", np.array([-2.0]))
        tape = Tape()
        loss = sum_all(relu(w, tape), tape)
        backward(tape, loss)
        assert store.collect_grads()["w"] == np.array([0.0])

    def test_unselected_branch_gets_exact_zero(self):
        rng = np.random.default_rng(4)
        store = ParamStore()
        wa = store.add("branch_a", rng.normal(size=(3, 1)))
        wb = store.add("branch_b", rng.normal(size=(3, 1)))
        x = Tensor(rng.normal(size=(2, 3)), constant=True)
        tape = Tape()
        out = linear(x, wa, Tensor(np.zeros(1)), tape)  # only branch a used
        loss = sum_all(out, tape)
        backward(tape, loss)
        grads = store.collect_grads()
        assert np.array_equal(grads["branch_b"], np.zeros((3, 1)))
        assert np.any(grads["branch_a"] != 0.0)

    def test_non_scalar_loss_rejected(self):
        tape = Tape()
        t = relu(Tensor(np.ones(3)), tape)
        with pytest.raises(ValueError, match="scalar"):
            backward(tape, t)

    def test_tape_single_use(self):
        store = ParamStore()
        w = store.add("w", np.ones(2))
        tape = Tape()
        loss = sum_all(mul(w, w, tape), tape)
        backward(tape, loss)
        with pytest.raises(RuntimeError, match="consumed"):
            backward(tape, loss)

    def test_take_rows_scatters(self):
        store = ParamStore()
        w = store.add("w", np.arange(12.0).reshape(4, 3))
        tape = Tape()
        sel = take_rows(w, np.array([1, 3]), tape)
        loss = sum_all(sel, tape)
        backward(tape, loss)
        g = store.collect_grads()["w"]
        assert np.array_equal(g[1], np.ones(3))
        assert np.array_equal(g[3], np.ones(3))
        assert np.array_equal(g[0], np.zeros(3))

    def test_slice_cols_pads(self):
        store = ParamStore()
        w = store.add("w", np.ones((2, 4)))
        tape = Tape()
        loss = sum_all(slice_cols(w, 1, 3, tape), tape)
        backward(tape, loss)
        g = store.collect_grads()["w"]
        assert np.array_equal(g, [[0, 1, 1, 0], [0, 1, 1, 0]])


class TestAdam:
    def test_first_step_magnitude(self):
        store = ParamStore()
        store.add("p", np.array(1.0))
        adam_step(store, {"p": np.array(1.0)}, lr=2e-4)
        delta = float(store["p"].data) - 1.0
        assert delta == pytest.approx(-2e-4 / (1.0 + ADAM_EPS), rel=1e-12)

    def test_zero_gradient_no_change(self):
        store = ParamStore()
        store.add("p", np.array([3.0, -4.0]))
        adam_step(store, {"p": np.zeros(2)}, lr=2e-4)
        assert np.array_equal(store["p"].data, [3.0, -4.0])

    def test_moment_accumulation_sanity(self):
        store = ParamStore()
        store.add("p", np.array(0.0))
        adam_step(store, {"p": np.array(1.0)}, lr=2e-4)
        d1 = abs(float(store["p"].data))
        before = float(store["p"].data)
        adam_step(store, {"p": np.array(1.0)}, lr=2e-4)
        d2 = abs(float(store["p"].data) - before)
        assert d2 <= d1 * 1.01

    def test_non_finite_gradient_rejected(self):
        store = ParamStore()
        store.add("p", np.array(0.0))
        with pytest.raises(ValueError, match="non-finite"):
            adam_step(store, {"p": np.array(float("nan"))}, lr=1e-3)


class TestLrSchedule:
    def test_six_stale_epochs_cut(self):
        losses = [1.0, 0.9, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8]
        assert lr_schedule(losses, 2e-4) == pytest.approx(2e-5)

    def test_monotone_improvement_keeps_lr(self):
        losses = [1.0, 0.9, 0.8, 0.7, 0.6]
        assert lr_schedule(losses, 2e-4) == 2e-4

    def test_exactly_five_stale_epochs_keeps_lr(self):
        losses = [1.0, 0.9, 0.8, 0.8, 0.8, 0.8, 0.8]
        assert lr_schedule(losses, 2e-4) == 2e-4

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            lr_schedule([], 1e-3)

    def test_scheduler_resets_after_cut(self):
        sched = PlateauScheduler(2e-4)
        for loss in [1.0, 0.9, 0.8, 0.8, 0.8, 0.8, 0.8]:
            lr = sched.update(loss)
        assert lr == 2e-4 and sched.cuts == 0
        lr = sched.update(0.8)  # sixth stale epoch
        assert lr == pytest.approx(2e-5) and sched.cuts == 1
        # counter restarts: five more stale epochs do not cut again
        for loss in [0.8] * 5:
            lr = sched.update(loss)
        assert lr == pytest.approx(2e-5) and sched.cuts == 1
        lr = sched.update(0.8)
        assert lr == pytest.approx(2e-6) and sched.cuts == 2


class TestGradCheck:
    def test_quadratic_bowl_exact(self):
        store = ParamStore()
        store.add("w", np.array([1.0, -2.0, 0.5]))

        def f(s, tape):
            return sum_all(mul(s["w"], s["w"], tape), tape)

        assert grad_check(f, store) < 1e-8

    def test_constant_function_zero(self):
        store = ParamStore()
        store.add("w", np.array([1.0, 2.0]))

        def f(s, tape):
            return sum_all(Tensor(np.array([5.0])), tape)

        assert grad_check(f, store) == 0.0

    def test_composed_network(self):
        rng = np.random.default_rng(7)
        store = ParamStore()
        store.add("w1", rng.normal(0, 0.4, (5, 8)))
        store.add("b1", rng.normal(0, 0.1, 8))
        store.add("w2", rng.normal(0, 0.4, (8, 2)))
        store.add("b2", np.zeros(2))
        store.add("lv", np.array(0.1))
        x = rng.normal(size=(6, 5))
        t = rng.normal(size=(6, 2))

        def f(s, tape):
            h = relu(linear(Tensor(x, constant=True), s["w1"], s["b1"], tape),
                     tape)
            o = linear(h, s["w2"], s["b2"], tape)
            r = sub(o, Tensor(t, constant=True), tape)
            ms = mean_all(mul(r, r, tape), tape)
            w = tensor_exp(scalar_mul(s["lv"], -1.0, tape), tape)
            return add(mul(w, ms, tape), scalar_mul(s["lv"], 0.5, tape), tape)

        assert grad_check(f, store, h=1e-6) < 1e-5

    def test_exp_abs_ops(self):
        store = ParamStore()
        store.add("w", np.array([0.3, -0.7]))

        def f(s, tape):
            return sum_all(add(tensor_exp(s["w"], tape),
                               tensor_abs(s["w"], tape), tape), tape)

        assert grad_check(f, store) < 1e-8

    def test_dropout_frozen_mask_gradient(self):
        rng = np.random.default_rng(9)
        store = ParamStore()
        store.add("w", rng.normal(size=(4, 4)))
        x = rng.normal(size=(3, 4))

        def f(s, tape):
            h = linear(Tensor(x, constant=True), s["w"], Tensor(np.zeros(4)),
                       tape)
            # same seed every call keeps the mask frozen
            d = dropout(h, 0.5, np.random.default_rng(123), True, tape)
            return mean_all(mul(d, d, tape), tape)

        assert grad_check(f, store, h=1e-6) < 1e-6


class TestCheckpoint:
    def test_bit_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        store = ParamStore()
        store.add("a.w", rng.normal(size=(7, 3)))
        store.add("a.b", rng.normal(size=3) * 1e-17)
        store.add("s", np.array(-0.12345678901234567))
        path = tmp_path / "ck.json"
        save_params(path, store, meta={"note": "test"})
        loaded, meta = load_params(path)
        assert meta["note"] == "test"
        assert loaded.names() == store.names()
        for name in store.names():
            assert np.array_equal(loaded[name].data, store[name].data)

    def test_version_check(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 99, "params": {}}')
        with pytest.raises(ValueError, match="version"):
            load_params(path)
