"""Objective functions: frozen hand values, sign conventions, gradient flow."""

import numpy as np
import pytest

from ganmtl.losses import (
    LossConfig,
    adversarial_term,
    cross_entropy_mean,
    loss_discriminator,
    loss_generator_mtl,
    loss_mse,
    loss_pc_discriminator,
    loss_pc_generator,
)
from ganmtl.models import build_discriminator, build_generator, discriminator_forward, generator_forward
from ganmtl.rng import Rng
from ganmtl.tensor import DomainError, Param, ShapeError, Tape, Tensor, backward, check_gradients

LN2 = float(np.log(2.0))


def test_loss_config_validation():
    LossConfig()  # defaults are legal
    with pytest.raises(ValueError, match="adv_weight"):
        LossConfig(adv_weight=-0.5)
    with pytest.raises(ValueError, match="recon_norm"):
        LossConfig(recon_norm="l3")
    with pytest.raises(ValueError, match="g_adv_form"):
        LossConfig(g_adv_form="minimax")
    with pytest.raises(ValueError, match="prob_clamp"):
        LossConfig(prob_clamp=0.5)
    with pytest.raises(ValueError, match="prob_clamp"):
        LossConfig(prob_clamp=0.0)


# ---------------------------------------------------------------------------
# reconstruction


def test_mse_identity_is_zero():
    x = Tensor(Rng(1).uniform((4, 3), -1.0, 1.0))
    assert loss_mse(Tape(), x, Tensor(x.data.copy())).item() == 0.0


def test_mse_hand_value():
    out = loss_mse(Tape(), Tensor([[0.0, 0.0]]), Tensor([[1.0, 2.0]]))
    assert out.item() == 2.5


def test_mse_permutation_invariant():
    rng = Rng(2)
    a = rng.uniform((6, 3), -1.0, 1.0)
    b = rng.uniform((6, 3), -1.0, 1.0)
    perm = rng.permutation(6)
    full = loss_mse(Tape(), Tensor(a), Tensor(b)).item()
    permuted = loss_mse(Tape(), Tensor(a[perm]), Tensor(b[perm])).item()
    assert np.isclose(full, permuted, atol=1e-12, rtol=0.0)


def test_mse_positive_unless_equal():
    a = Tensor(np.zeros((2, 2)))
    b = Tensor(np.array([[0.0, 0.0], [0.0, 1e-9]]))
    assert loss_mse(Tape(), a, b).item() > 0.0


def test_mse_l1_norm():
    out = loss_mse(Tape(), Tensor([[0.0, 0.0]]), Tensor([[1.0, -2.0]]), norm="l1")
    assert out.item() == 1.5


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError, match="reconstruction"):
        loss_mse(Tape(), Tensor(np.ones((2, 2))), Tensor(np.ones((2, 3))))


# ---------------------------------------------------------------------------
# binary adversarial


def test_discriminator_loss_equilibrium():
    cfg = LossConfig()
    half = Tensor(np.full((4, 1), 0.5))
    out = loss_discriminator(Tape(), half, half, cfg)
    assert abs(out.item() - 2.0 * LN2) < 1e-12


def test_discriminator_loss_hand_value():
    cfg = LossConfig()
    out = loss_discriminator(Tape(), Tensor([[0.8]]), Tensor([[0.3]]), cfg)
    expected = -np.log(0.8) - np.log(0.7)  # 0.57982...
    assert abs(out.item() - expected) < 1e-12
    assert abs(out.item() - 0.57982) < 5e-6


def test_discriminator_loss_perfect_limit():
    cfg = LossConfig()
    eps = cfg.prob_clamp
    out = loss_discriminator(Tape(), Tensor([[1.0 - eps]]), Tensor([[eps]]), cfg)
    assert 0.0 < out.item() < 3.0 * eps


def test_discriminator_loss_strictly_positive_and_finite():
    cfg = LossConfig()
    rng = Rng(3)
    for _ in range(20):
        d_real = Tensor(rng.uniform((5, 1), 0.0, 1.0))
        d_fake = Tensor(rng.uniform((5, 1), 0.0, 1.0))
        val = loss_discriminator(Tape(), d_real, d_fake, cfg).item()
        assert np.isfinite(val) and val > 0.0
    # saturated inputs stay bounded by the clamp: 2|log eps|
    worst = loss_discriminator(Tape(), Tensor([[0.0]]), Tensor([[1.0]]), cfg).item()
    assert np.isfinite(worst)
    assert worst <= 2.0 * abs(np.log(cfg.prob_clamp)) + 1e-9


def test_discriminator_loss_rejects_non_probabilities():
    cfg = LossConfig()
    with pytest.raises(DomainError, match="probabilities"):
        loss_discriminator(Tape(), Tensor([[1.2]]), Tensor([[0.5]]), cfg)
    with pytest.raises(DomainError, match="probabilities"):
        loss_discriminator(Tape(), Tensor([[0.5]]), Tensor([[-0.1]]), cfg)


def test_generator_adv_forms_at_half():
    half = Tensor(np.full((3, 1), 0.5))
    sat = adversarial_term(Tape(), half, LossConfig(g_adv_form="saturating")).item()
    nonsat = adversarial_term(Tape(), half, LossConfig(g_adv_form="non-saturating")).item()
    assert abs(sat + LN2) < 1e-12   # log(1 - 0.5) = -ln 2
    assert abs(nonsat - LN2) < 1e-12  # -log(0.5) = +ln 2


def test_generator_adv_forms_equal_gradient_at_half():
    # Both forms push d_fake upward with the same strength at the 0.5
    # crossover point, so swapping forms cannot flip early training dynamics.
    grads = {}
    for form in ("saturating", "non-saturating"):
        p = Param("logit", np.zeros((3, 1)))
        tape = Tape()
        d_fake = tape.sigmoid(tape.param(p))
        adv = adversarial_term(tape, d_fake, LossConfig(g_adv_form=form))
        backward(tape, adv)
        grads[form] = p.grad.data.copy()
    assert np.allclose(grads["saturating"], grads["non-saturating"], atol=1e-12, rtol=0.0)


def test_generator_mtl_weight_zero_reduces_to_mse():
    rng = Rng(4)
    xm = Tensor(rng.uniform((4, 3), -1.0, 1.0))
    xr = Tensor(rng.uniform((4, 3), -1.0, 1.0))
    d_fake = Tensor(rng.uniform((4, 1), 0.0, 1.0))
    cfg = LossConfig(adv_weight=0.0)
    total = loss_generator_mtl(Tape(), xm, xr, d_fake, cfg).item()
    assert total == loss_mse(Tape(), xm, xr).item()


def test_generator_mtl_hand_value():
    xm = Tensor([[0.0, 0.0]])
    xr = Tensor([[1.0, 2.0]])
    d_fake = Tensor([[0.5]])
    out = loss_generator_mtl(Tape(), xm, xr, d_fake, LossConfig(adv_weight=1.0))
    assert abs(out.item() - (2.5 - LN2)) < 1e-12


# ---------------------------------------------------------------------------
# phoneme-classification adversarial


def test_cross_entropy_uniform_is_log_classes():
    for P in (2, 4, 8):
        p = Tensor(np.full((3, P), 1.0 / P))
        labels = np.zeros((3, P))
        labels[:, 0] = 1.0
        ce = cross_entropy_mean(Tape(), p, Tensor(labels), eps=1e-7).item()
        assert abs(ce - np.log(P)) < 1e-9


def test_cross_entropy_perfect_prediction_near_zero():
    labels = np.eye(3)
    ce = cross_entropy_mean(Tape(), Tensor(labels.copy()), Tensor(labels), eps=1e-7).item()
    assert 0.0 < ce < 1e-6


def test_pc_discriminator_hand_value():
    cfg = LossConfig()
    out = loss_pc_discriminator(
        Tape(),
        Tensor([[0.9, 0.1]]),
        Tensor([[0.6, 0.4]]),
        Tensor([[1.0, 0.0]]),
        cfg,
    )
    expected = -np.log(0.9) + np.log(0.6)  # -0.40547...
    assert abs(out.item() - expected) < 1e-9
    assert abs(out.item() - (-0.40547)) < 5e-6


def test_pc_discriminator_validation():
    cfg = LossConfig()
    ok = Tensor([[0.5, 0.5]])
    labels = Tensor([[1.0, 0.0]])
    with pytest.raises(DomainError, match="normalized"):
        loss_pc_discriminator(Tape(), Tensor([[0.5, 0.4]]), ok, labels, cfg)
    with pytest.raises(DomainError, match="one-hot"):
        loss_pc_discriminator(Tape(), ok, ok, Tensor([[0.5, 0.5]]), cfg)
    with pytest.raises(ShapeError, match="labels"):
        loss_pc_discriminator(Tape(), ok, ok, Tensor([[1.0, 0.0, 0.0]]), cfg)


def test_pc_generator_uniform_hand_value():
    rng = Rng(5)
    xm = Tensor(rng.uniform((2, 3), -1.0, 1.0))
    xr = Tensor(rng.uniform((2, 3), -1.0, 1.0))
    p_fake = Tensor(np.full((2, 4), 0.25))
    labels = np.zeros((2, 4))
    labels[:, 1] = 1.0
    mse = loss_mse(Tape(), xm, xr).item()
    out = loss_pc_generator(Tape(), xm, xr, p_fake, Tensor(labels), LossConfig(adv_weight=1.0))
    assert abs(out.item() - (mse - np.log(4.0))) < 1e-9


def test_pc_generator_weight_zero_reduces_to_mse():
    rng = Rng(6)
    xm = Tensor(rng.uniform((2, 3), -1.0, 1.0))
    xr = Tensor(rng.uniform((2, 3), -1.0, 1.0))
    p_fake = Tensor(np.full((2, 4), 0.25))
    labels = np.zeros((2, 4))
    labels[:, 0] = 1.0
    out = loss_pc_generator(Tape(), xm, xr, p_fake, Tensor(labels), LossConfig(adv_weight=0.0))
    assert out.item() == loss_mse(Tape(), xm, xr).item()


# ---------------------------------------------------------------------------
# gradient flow through the losses


def test_discriminator_loss_gradcheck():
    rng = Rng(7)
    p_real = Param("lr", rng.uniform((3, 1), -1.0, 1.0))
    p_fake = Param("lf", rng.uniform((3, 1), -1.0, 1.0))
    cfg = LossConfig()

    def f():
        tape = Tape()
        d_real = tape.sigmoid(tape.param(p_real))
        d_fake = tape.sigmoid(tape.param(p_fake))
        return tape, loss_discriminator(tape, d_real, d_fake, cfg)

    report = check_gradients(f, [p_real, p_fake])
    assert report.passed, str(report)


def test_pc_losses_gradcheck():
    rng = Rng(8)
    logits_r = Param("zr", rng.uniform((3, 4), -1.0, 1.0))
    logits_f = Param("zf", rng.uniform((3, 4), -1.0, 1.0))
    labels = np.zeros((3, 4))
    labels[np.arange(3), [0, 2, 1]] = 1.0
    labels_t = Tensor(labels)
    cfg = LossConfig()

    def f():
        tape = Tape()
        p_real = tape.softmax(tape.param(logits_r), axis=1)
        p_fake = tape.softmax(tape.param(logits_f), axis=1)
        return tape, loss_pc_discriminator(tape, p_real, p_fake, labels_t, cfg)

    report = check_gradients(f, [logits_r, logits_f])
    assert report.passed, str(report)


def test_generator_mtl_gradcheck_through_models():
    # End to end: generator frames scored by the discriminator, multi-task
    # loss differentiated back to every generator parameter.
    rng = Rng(9)
    g = build_generator(rng, noise_dim=2, cond_dim=2, out_dim=3,
                        dense_widths=(3,), rec_hidden=2, rec_layers=1)
    d = build_discriminator(rng, window=5, cond_dim=2, acoustic_dim=3,
                            conv_channels=(2, 2), fc_width=4)
    z = Tensor(rng.uniform((5, 2), -1.0, 1.0))
    y = Tensor(rng.uniform((5, 2), -1.0, 1.0))
    y_win = Tensor(rng.uniform((1, 2), -1.0, 1.0))
    x_real = Tensor(rng.uniform((5, 3), -1.0, 1.0))
    cfg = LossConfig(adv_weight=1.0)

    def f():
        tape = Tape()
        x_model = generator_forward(tape, g, z, y)
        win = tape.reshape(x_model, (1, 5, 3))
        d_fake = discriminator_forward(tape, d, win, y_win, mode="infer")
        return tape, loss_generator_mtl(tape, x_model, x_real, d_fake, cfg)

    report = check_gradients(f, g.params())
    assert report.passed, str(report)
