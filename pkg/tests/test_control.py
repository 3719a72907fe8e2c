import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualsys import nets
from dualsys.control import (ActorCritic, ReplayBuffer, TargetNets,
                             act_with_noise, cacla_actor_update, cacla_grads,
                             critic_grads, critic_target, critic_update,
                             ddpg_actor_update, ddpg_grads)
from oracles import fd_param_grads, max_rel_err_bundles, relu_margin


def make_ac(seed=0, latent_dim=3, action_dim=2, hidden=8):
    return ActorCritic.build(latent_dim, action_dim, hidden, hidden,
                             np.random.default_rng(seed))


def make_targets(seed=0, latent_dim=3, action_dim=2, hidden=8):
    rng = np.random.default_rng(seed)
    enc = nets.init_net([5, hidden, latent_dim], ["relu", "linear"], rng)
    critic = nets.init_net([latent_dim + action_dim, hidden, 1], ["relu", "linear"], rng)
    actor = nets.init_net([latent_dim, hidden, action_dim], ["relu", "tanh"], rng)
    return TargetNets(enc, critic, actor)


def zero_critic_targets(latent_dim=3, action_dim=2):
    critic = nets.ParamSet([nets.Layer(np.zeros((1, latent_dim + action_dim)),
                                       np.zeros(1), "linear")])
    actor = nets.ParamSet([nets.Layer(np.zeros((action_dim, latent_dim)),
                                      np.zeros(action_dim), "tanh")])
    return TargetNets(None, critic, actor)


def test_critic_target_zero_bootstrap():
    t = zero_critic_targets()
    y = critic_target(t, np.array([1.0]), np.zeros((1, 3)), 0.99)
    assert y[0] == 1.0


def test_critic_target_direct_substitution():
    t = zero_critic_targets()
    t.critic.layers[0].b[0] = 0.5  # Q' constant 0.5
    y = critic_target(t, np.array([0.0]), np.zeros((1, 3)), 0.99)
    assert y[0] == pytest.approx(0.495, abs=1e-15)


def test_critic_target_terminal_truncates():
    t = zero_critic_targets()
    t.critic.layers[0].b[0] = 5.0
    y = critic_target(t, np.array([1.0, 1.0]), np.zeros((2, 3)), 0.99,
                      terminal=np.array([1.0, 0.0]))
    assert y[0] == 1.0
    assert y[1] == pytest.approx(1.0 + 0.99 * 5.0)


def test_critic_target_matches_straight_line_recomputation():
    rng = np.random.default_rng(1)
    t = make_targets(2)
    phi2 = rng.uniform(-1, 1, (6, 3))
    r = rng.uniform(-1, 1, 6)
    y = critic_target(t, r, phi2, 0.97)
    for i in range(6):
        a2 = nets.forward(t.actor, phi2[i])
        q2 = nets.forward(t.critic, np.concatenate([phi2[i], a2]))[0]
        assert y[i] == pytest.approx(r[i] + 0.97 * q2, abs=1e-12)


def test_critic_target_rejects_bad_gamma():
    with pytest.raises(ValueError):
        critic_target(zero_critic_targets(), np.array([0.0]), np.zeros((1, 3)), 1.5)


def test_critic_update_zero_residual_is_noop():
    ac = make_ac(3)
    for layer in ac.critic.layers:
        layer.w[...] = 0.0
        layer.b[...] = 0.0
    before = nets.params_vector(ac.critic).copy()
    phi = np.zeros((4, 3))
    a = np.zeros((4, 2))
    y = np.zeros(4)  # Q == y == 0 exactly
    critic_update(ac, phi, a, y, lr=1e-3)
    assert np.array_equal(before, nets.params_vector(ac.critic))


def test_critic_update_overfits_single_transition():
    ac = make_ac(4)
    rng = np.random.default_rng(5)
    phi = rng.uniform(-1, 1, (1, 3))
    a = rng.uniform(-1, 1, (1, 2))
    y = np.array([0.7])
    for _ in range(5000):
        critic_update(ac, phi, a, y, lr=1e-3)
    q = nets.forward(ac.critic, np.concatenate([phi, a], axis=1))[0, 0]
    assert abs(q - 0.7) < 1e-3


def test_critic_grads_match_finite_differences():
    rng = np.random.default_rng(6)
    ac = make_ac(7)
    while True:
        phi = rng.uniform(-1, 1, (5, 3))
        a = rng.uniform(-1, 1, (5, 2))
        x = np.concatenate([phi, a], axis=1)
        if relu_margin([ac.critic], [x]) > 1e-3:
            break
    y = rng.uniform(-1, 1, 5)
    _, analytic = critic_grads(ac, phi, a, y)
    numeric = fd_param_grads(lambda: critic_grads(ac, phi, a, y)[0], [ac.critic])[0]
    assert max_rel_err_bundles(analytic.layers, numeric) < 1e-4


def test_critic_update_rejects_empty_batch():
    ac = make_ac(8)
    with pytest.raises(ValueError):
        critic_update(ac, np.zeros((0, 3)), np.zeros((0, 2)), np.zeros(0), 1e-3)


def test_ddpg_drives_actor_to_synthetic_optimum():
    # A tanh hidden layer cannot express Q(phi, a) = -|a - a*|^2 exactly, so
    # fit a surrogate critic to it first and then check the actor update
    # climbs to the maximum.  The sampling mixes uniform coverage with
    # batches concentrated near a* so the fitted peak lands close enough;
    # with this seed the surrogate's own argmax sits within 1e-3 of a*.
    rng = np.random.default_rng(42)
    a_star = np.array([0.3, -0.4])
    critic = nets.init_net([5, 96, 1], ["tanh", "linear"], rng)
    state = nets.AdamState.for_params(critic)
    phi_fixed = np.array([0.2, -0.1, 0.4])
    for k in range(24000):
        lr = 1e-3 if k < 12000 else (1e-4 if k < 20000 else 2e-5)
        a = np.concatenate(
            [
                rng.uniform(-1, 1, (16, 2)),
                np.clip(a_star + 0.35 * rng.standard_normal((24, 2)), -1, 1),
                np.clip(a_star + 0.08 * rng.standard_normal((24, 2)), -1, 1),
            ]
        )
        x = np.concatenate([np.tile(phi_fixed, (64, 1)), a], axis=1)
        target = -np.sum((a - a_star) ** 2, axis=1)
        q = nets.forward(critic, x)[:, 0]
        g = (2.0 * (q - target) / 64)[:, None]
        nets.adam_step(critic, nets.backward(critic, x, g), state, lr)

    ac = make_ac(10)
    ac.critic = critic
    phi = np.tile(phi_fixed, (16, 1))
    for _ in range(4000):
        ddpg_actor_update(ac, phi, lr=1e-2)
    mu = nets.forward(ac.actor, phi_fixed)
    assert np.max(np.abs(mu - a_star)) < 1e-2


def test_ddpg_zero_lr_keeps_actor():
    ac = make_ac(11)
    before = nets.params_vector(ac.actor).copy()
    ddpg_actor_update(ac, np.random.default_rng(0).uniform(-1, 1, (4, 3)), lr=0.0)
    assert np.array_equal(before, nets.params_vector(ac.actor))


def test_ddpg_grads_match_finite_differences():
    rng = np.random.default_rng(12)
    ac = make_ac(13)
    while True:
        phi = rng.uniform(-1, 1, (4, 3))
        mu = nets.forward(ac.actor, phi)
        x = np.concatenate([phi, mu], axis=1)
        if relu_margin([ac.actor, ac.critic], [phi, x]) > 1e-3:
            break
    _, analytic = ddpg_grads(ac, phi)
    numeric = fd_param_grads(lambda: ddpg_grads(ac, phi)[0], [ac.actor])[0]
    assert max_rel_err_bundles(analytic.layers, numeric) < 1e-4


def test_cacla_positive_advantage_moves_toward_action():
    ac = make_ac(14, latent_dim=2, action_dim=1)
    phi = np.array([[0.5, -0.2]])
    target_a = np.array([[0.5]])
    mu0 = nets.forward(ac.actor, phi[0])[0]
    loss, _, k = cacla_grads(ac, phi, target_a, np.array([0.8]))
    assert k == 1
    assert loss == pytest.approx((target_a[0, 0] - mu0) ** 2, abs=1e-12)
    for _ in range(2000):
        cacla_actor_update(ac, phi, target_a, np.array([0.8]), lr=1e-3)
    mu1 = nets.forward(ac.actor, phi[0])[0]
    assert abs(mu1 - 0.5) < abs(mu0 - 0.5)
    assert abs(mu1 - 0.5) < 1e-2


def test_cacla_gate_blocks_nonpositive_delta():
    for delta in (-0.2, 0.0):
        ac = make_ac(15)
        before = nets.params_vector(ac.actor).copy()
        cacla_actor_update(ac, np.ones((1, 3)), np.zeros((1, 2)),
                           np.array([delta]), lr=1e-2)
        assert np.array_equal(before, nets.params_vector(ac.actor))
        assert ac.actor_adam.t == 0


def test_cacla_grads_match_finite_differences():
    rng = np.random.default_rng(16)
    ac = make_ac(17)
    while True:
        phi = rng.uniform(-1, 1, (6, 3))
        if relu_margin([ac.actor], [phi]) > 1e-3:
            break
    a = rng.uniform(-1, 1, (6, 2))
    delta = rng.uniform(-1, 1, 6)
    if not np.any(delta > 0):
        delta[0] = 0.5
    _, analytic, _ = cacla_grads(ac, phi, a, delta)
    numeric = fd_param_grads(lambda: cacla_grads(ac, phi, a, delta)[0], [ac.actor])[0]
    assert max_rel_err_bundles(analytic.layers, numeric) < 1e-4


def test_actor_outputs_bounded():
    rng = np.random.default_rng(18)
    ac = make_ac(19)
    for layer in ac.actor.layers:  # inflate weights to push tanh to saturation
        layer.w *= 50.0
    out = nets.forward(ac.actor, rng.uniform(-5, 5, (100, 3)))
    assert np.all(out >= -1.0) and np.all(out <= 1.0)


def test_act_with_noise_zero_scale_exact():
    ac = make_ac(20)
    phi = np.array([0.1, 0.2, 0.3])
    a = act_with_noise(ac.actor, phi, 0.0, np.random.default_rng(0))
    assert np.array_equal(a, nets.forward(ac.actor, phi))


def test_act_with_noise_clips_to_bounds():
    actor = nets.ParamSet([nets.Layer(np.zeros((1, 2)), np.array([np.arctanh(0.9)]), "tanh")])

    class FixedRng:
        def standard_normal(self, shape):
            return np.full(shape, 0.5)

    a = act_with_noise(actor, np.zeros(2), 1.0, FixedRng())
    assert a[0] == 1.0


def test_act_with_noise_statistical_mean():
    ac = make_ac(21)
    for layer in ac.actor.layers:
        layer.w[...] = 0.0
        layer.b[...] = 0.0  # mu = 0, no clipping in practice at scale 0.1
    rng = np.random.default_rng(22)
    phi = np.zeros(3)
    draws = np.stack([act_with_noise(ac.actor, phi, 0.1, rng) for _ in range(10 ** 5)])
    bound = 3 * 0.1 / np.sqrt(10 ** 5)
    assert np.all(np.abs(draws.mean(axis=0)) < bound)


def test_buffer_ring_semantics():
    buf = ReplayBuffer(3)
    for i in range(4):
        buf.store(i)
    assert len(buf) == 3
    assert buf.ordered() == [1, 2, 3]


def test_buffer_sample_with_replacement_from_singleton():
    buf = ReplayBuffer(5)
    buf.store("only")
    out = buf.sample(7, np.random.default_rng(0))
    assert out == ["only"] * 7


def test_buffer_sample_empty_rejected():
    with pytest.raises(ValueError):
        ReplayBuffer(2).sample(1, np.random.default_rng(0))


def test_buffer_uniformity_chi_squared():
    from scipy import stats
    buf = ReplayBuffer(10)
    for i in range(10):
        buf.store(i)
    rng = np.random.default_rng(23)
    counts = np.zeros(10)
    for v in buf.sample(10 ** 5, rng):
        counts[v] += 1
    chi2 = float(np.sum((counts - 10 ** 4) ** 2 / 10 ** 4))
    assert chi2 < stats.chi2.ppf(0.99, df=9)


@given(cap=st.integers(1, 20), n=st.integers(0, 60))
@settings(max_examples=50, deadline=None)
def test_buffer_keeps_newest_in_order(cap, n):
    buf = ReplayBuffer(cap)
    for i in range(n):
        buf.store(i)
    assert len(buf) == min(cap, n)
    assert buf.ordered() == list(range(max(0, n - cap), n))


def test_target_lag_sup_norm_non_increasing():
    rng = np.random.default_rng(24)
    ac = make_ac(25)
    tgt = nets.clone_params(ac.actor)
    # drift the online actor, then blend with fixed source
    for _ in range(5):
        ddpg_actor_update(ac, rng.uniform(-1, 1, (4, 3)), lr=1e-2)
    last = np.max(np.abs(nets.params_vector(tgt) - nets.params_vector(ac.actor)))
    for _ in range(100):
        nets.soft_update(tgt, ac.actor, 0.03)
        cur = np.max(np.abs(nets.params_vector(tgt) - nets.params_vector(ac.actor)))
        assert cur <= last + 1e-15
        last = cur
