"""Generative world model: context encoding, samplers, densities, training."""

import numpy as np
import pytest

from loopwm.errors import CheckpointError, DomainError, LoopwmError
from loopwm.memory import WorldMemory
from loopwm.microworld import encode_state, parse_literal, reference_segment
from loopwm.numerics import (
    RandomSource,
    finite_diff_grad,
    gaussian_logpdf,
    net_backward,
    net_init,
)
from loopwm.planner import Goal, plan
from loopwm.worldmodel import (
    PolicyBundle,
    SamplerConfig,
    build_demos,
    channel_mask,
    context_width,
    embed_condition,
    flow_matching_loss,
    load_policy,
    mean_velocity_coeff,
    sample_ode,
    sample_sde,
    save_policy,
    score_term,
    sft_train,
    transition_logprob,
    transition_mean,
    velocity,
    velocity_input,
    velocity_net_sizes,
)


def small_config(frame_width, n_frames=2, k_steps=4, eta_scale=0.3):
    return SamplerConfig(k_steps=k_steps, eta_scale=eta_scale, n_frames=n_frames,
                         frame_width=frame_width)


def plan_steps(spec, *texts):
    goal = Goal(tuple(parse_literal(t) for t in texts))
    return list(plan(spec, goal, spec.initial_state()).steps)


def tiny_net(latent, cond_width, hidden=6, seed=0):
    sizes = [latent + 1 + cond_width, hidden, latent]
    return net_init(sizes, RandomSource(seed))


# context encoding


def test_context_width_and_initial_frame(kitchen):
    width = context_width(kitchen)
    assert width == 2 * len(kitchen.channels) + len(kitchen.operators) + 1
    steps = plan_steps(kitchen, "cup.full")
    memory = WorldMemory.fresh(kitchen)
    cond = embed_condition(kitchen, steps[0], memory)
    assert cond.shape == (width,)
    d = len(kitchen.channels)
    np.testing.assert_array_equal(cond[:d], encode_state(kitchen, kitchen.initial_state()))
    # one-hot block sums to exactly one
    assert cond[d:d + len(kitchen.operators)].sum() == 1.0


def test_context_uses_last_accepted_frame(kitchen):
    steps = plan_steps(kitchen, "cup.full")
    memory = WorldMemory.fresh(kitchen)
    op = kitchen.find_operator(steps[0].actions[0])
    seg = reference_segment(kitchen, memory.state, op.binding)
    memory.advance(steps[0], seg, reward=1.0)
    cond = embed_condition(kitchen, steps[1], memory)
    d = len(kitchen.channels)
    np.testing.assert_array_equal(cond[:d], seg.final_frame)
    again = embed_condition(kitchen, steps[1], memory)
    np.testing.assert_array_equal(cond, again)


def test_context_channel_mask_marks_movers(kitchen):
    steps = plan_steps(kitchen, "cup.full")
    pour_kettle = next(s for s in steps if s.actions[0].verb == "pour"
                       and s.actions[0].objects[0] == "kettle")
    mask = channel_mask(kitchen, pour_kettle)
    idx = kitchen.channel_index
    assert mask[idx["cup.full"]] == 1.0
    for key in ("kettle.x", "kettle.y", "hand.x", "hand.y"):
        assert mask[idx[key]] == 1.0
    assert mask[idx["jar.closed"]] == 0.0


def test_context_unknown_operator_rejected(kitchen, workshop):
    steps = plan_steps(workshop, "board.sanded")
    with pytest.raises(DomainError):
        embed_condition(kitchen, steps[0], WorldMemory.fresh(kitchen))


# velocity field and samplers


def test_velocity_zero_net_is_zero():
    theta = tiny_net(latent=4, cond_width=3)
    for w in theta.weights:
        w[:] = 0.0
    for b in theta.biases:
        b[:] = 0.0
    u = velocity(theta, np.ones(4), 0.5, np.ones(3))
    np.testing.assert_array_equal(u, np.zeros(4))


def test_velocity_rejects_bad_time_and_shape():
    theta = tiny_net(latent=4, cond_width=3)
    with pytest.raises(LoopwmError):
        velocity(theta, np.ones(4), 0.0, np.ones(3))
    with pytest.raises(LoopwmError):
        velocity(theta, np.ones(4), 1.5, np.ones(3))
    with pytest.raises(LoopwmError):
        velocity(theta, np.ones(5), 0.5, np.ones(3))


def test_ode_zero_velocity_returns_input():
    theta = tiny_net(latent=4, cond_width=3)
    for w in theta.weights:
        w[:] = 0.0
    for b in theta.biases:
        b[:] = 0.0
    config = small_config(frame_width=2)
    z = np.array([0.1, 0.2, 0.3, 0.4])
    seg = sample_ode(theta, np.ones(3), z, config)
    np.testing.assert_array_equal(seg.frames.reshape(-1), z)


def test_ode_single_step_unroll():
    theta = tiny_net(latent=4, cond_width=3, seed=5)
    config = small_config(frame_width=2, k_steps=1)
    z = np.linspace(-1.0, 1.0, 4)
    cond = np.array([0.3, 0.6, 0.9])
    seg = sample_ode(theta, cond, z, config)
    expected = z - velocity(theta, z, 1.0, cond) * 1.0
    np.testing.assert_array_equal(seg.frames.reshape(-1), expected)


def test_sde_zero_noise_matches_ode_bitwise():
    rng = RandomSource(11)
    for trial in range(20):
        theta = tiny_net(latent=6, cond_width=2, seed=100 + trial)
        config = small_config(frame_width=3, k_steps=5, eta_scale=0.0)
        z = np.asarray(rng.normal(shape=6))
        cond = np.asarray(rng.normal(shape=2))
        ode = sample_ode(theta, cond, z, config)
        sde, trace = sample_sde(theta, cond, z, config, RandomSource(999, trial))
        assert np.array_equal(ode.frames, sde.frames)
        assert all(s.std == 0.0 for s in trace.steps)


def test_sde_reproducible_and_trace_shape():
    theta = tiny_net(latent=4, cond_width=3, seed=2)
    config = small_config(frame_width=2, k_steps=6)
    z = np.full(4, 0.5)
    cond = np.array([0.1, 0.2, 0.3])
    seg_a, tr_a = sample_sde(theta, cond, z, config, RandomSource(7, 3))
    seg_b, tr_b = sample_sde(theta, cond, z, config, RandomSource(7, 3))
    assert np.array_equal(seg_a.frames, seg_b.frames)
    assert len(tr_a.steps) == 6
    for sa, sb in zip(tr_a.steps, tr_b.steps):
        assert np.array_equal(sa.z_next, sb.z_next)
        assert sa.logp == sb.logp
        assert sa.std > 0.0
        assert np.isfinite(sa.logp)


def test_trace_records_consistent_transitions():
    theta = tiny_net(latent=4, cond_width=3, seed=3)
    config = small_config(frame_width=2, k_steps=5)
    z = np.array([0.4, -0.2, 0.8, 0.0])
    cond = np.array([1.0, 0.0, 0.5])
    _, trace = sample_sde(theta, cond, z, config, RandomSource(21))
    dt = 1.0 / config.k_steps
    for step in trace.steps:
        assert step.dt == dt
        # schedule std
        eta = config.eta_scale * np.sqrt(step.t)
        assert step.std == pytest.approx(eta * np.sqrt(dt), abs=1e-15)
        # the recorded u regenerates the recorded mean under the same params
        mean, u = transition_mean(theta, step, cond, config.delta)
        np.testing.assert_allclose(mean, step.mean, atol=1e-12)
        np.testing.assert_allclose(u, step.u, atol=1e-12)
        # x_pred identity feeds the score: mean = z - (u - 0.5*eta^2*score)*dt
        x_pred = step.z - step.t * step.u
        drift = step.u - 0.5 * eta * eta * score_term(step.z, x_pred, step.t, config.delta)
        np.testing.assert_allclose(step.mean, step.z - drift * dt, atol=1e-12)


def test_first_transition_std_monte_carlo():
    theta = tiny_net(latent=4, cond_width=3, seed=4)
    config = small_config(frame_width=2, k_steps=1, eta_scale=0.3)
    z = np.full(4, 0.2)
    cond = np.array([0.5, 0.5, 0.5])
    samples = []
    for i in range(10_000):
        _, trace = sample_sde(theta, cond, z, config, RandomSource(13, i))
        samples.append(trace.steps[0].z_next - trace.steps[0].mean)
    observed = float(np.std(np.asarray(samples)))
    expected = 0.3 * np.sqrt(1.0) * np.sqrt(1.0)  # eta_1 * sqrt(dt), K=1
    assert abs(observed - expected) / expected < 0.03


def test_score_term_schedule():
    z = np.array([0.5, -0.5])
    x_pred = np.array([0.25, 0.75])
    t = 0.5
    expected = -(z - 0.5 * x_pred) / 0.25
    np.testing.assert_allclose(score_term(z, x_pred, t), expected)
    # at the conditional mean the score vanishes
    np.testing.assert_array_equal(score_term(0.5 * x_pred, x_pred, 0.5), np.zeros(2))
    # alpha = 0 at t = 1: score reduces to -z
    np.testing.assert_allclose(score_term(z, x_pred, 1.0), -z)
    # linearity in the residual
    np.testing.assert_allclose(score_term(2 * z, 2 * x_pred, 0.5), 2 * expected)


# transition log-densities


def test_transition_logprob_self_consistency():
    theta = tiny_net(latent=4, cond_width=3, seed=6)
    config = small_config(frame_width=2, k_steps=5)
    z = np.array([0.3, 0.1, -0.4, 0.9])
    cond = np.array([0.2, 0.8, 0.5])
    _, trace = sample_sde(theta, cond, z, config, RandomSource(31))
    total = 0.0
    for step in trace.steps:
        lp = transition_logprob(theta, step, cond, config.delta)
        assert lp == pytest.approx(step.logp, abs=1e-12)
        total += lp
    assert total == pytest.approx(trace.total_logp, abs=1e-10)


def test_transition_logprob_mode_and_additivity():
    theta = tiny_net(latent=4, cond_width=3, seed=7)
    config = small_config(frame_width=2, k_steps=3)
    _, trace = sample_sde(theta, np.ones(3) * 0.4, np.ones(4) * 0.1, config, RandomSource(41))
    step = trace.steps[0]
    at_mode = gaussian_logpdf(step.mean, step.mean, step.std)
    assert at_mode > step.logp or np.allclose(step.z_next, step.mean)
    # additivity over coordinate slices
    whole = gaussian_logpdf(step.z_next, step.mean, step.std)
    parts = gaussian_logpdf(step.z_next[:2], step.mean[:2], step.std) + \
        gaussian_logpdf(step.z_next[2:], step.mean[2:], step.std)
    assert whole == pytest.approx(parts, abs=1e-12)


def test_transition_logprob_requires_noise():
    theta = tiny_net(latent=4, cond_width=3, seed=8)
    config = small_config(frame_width=2, k_steps=2, eta_scale=0.0)
    _, trace = sample_sde(theta, np.ones(3), np.ones(4), config, RandomSource(5))
    with pytest.raises(LoopwmError):
        transition_logprob(theta, trace.steps[0], np.ones(3), config.delta)


def test_logprob_gradient_matches_finite_differences():
    # the analytic route: d(logp)/d(u) = c(t) * (z_next - mean) / std^2,
    # with c from mean_velocity_coeff, pushed through net_backward
    theta = tiny_net(latent=3, cond_width=2, hidden=4, seed=9)
    config = small_config(frame_width=1, n_frames=3, k_steps=4)
    z = np.array([0.2, -0.1, 0.5])
    cond = np.array([0.7, 0.3])
    _, trace = sample_sde(theta, cond, z, config, RandomSource(61))
    step = trace.steps[2]

    mean, _ = transition_mean(theta, step, cond, config.delta)
    coeff = mean_velocity_coeff(step, config.delta)
    out_grad = coeff * (step.z_next - mean) / (step.std * step.std)
    analytic, _ = net_backward(theta, velocity_input(step.z, step.t, cond), out_grad)

    numeric = finite_diff_grad(
        lambda p: transition_logprob(p, step, cond, config.delta), theta)
    for a, n in zip(analytic, numeric):
        denom = max(np.max(np.abs(n)), 1e-8)
        assert np.max(np.abs(a - n)) / denom < 1e-4


# supervised training


def test_flow_matching_gradient_matches_finite_differences():
    rng = RandomSource(17)
    theta = net_init([5, 4, 2], rng)  # 46 parameters
    conds = np.asarray(rng.normal(shape=(6, 2)))
    xs = np.asarray(rng.normal(shape=(6, 2)))
    ts = np.asarray(1.0 - rng.uniform(shape=6))
    eps = np.asarray(rng.normal(shape=(6, 2)))
    _, analytic = flow_matching_loss(theta, conds, xs, ts, eps)
    numeric = finite_diff_grad(
        lambda p: flow_matching_loss(p, conds, xs, ts, eps)[0], theta)
    for a, n in zip(analytic, numeric):
        denom = max(np.max(np.abs(n)), 1e-8)
        assert np.max(np.abs(a - n)) / denom < 1e-4


def test_sft_zero_epochs_is_identity(kitchen):
    config = SamplerConfig(n_frames=4, frame_width=len(kitchen.channels))
    demos = build_demos(kitchen, 3, RandomSource(71), n_frames=4)
    theta = net_init(velocity_net_sizes(kitchen, config, hidden=8), RandomSource(1))
    before = [w.copy() for w in theta.weights]
    trained, history = sft_train(theta, demos, epochs=0, lr=1e-3, rng=RandomSource(2))
    assert history == []
    for w0, w1 in zip(before, trained.weights):
        np.testing.assert_array_equal(w0, w1)


def test_sft_loss_halves_on_kitchen_demos(kitchen):
    config = SamplerConfig(n_frames=8, frame_width=len(kitchen.channels))
    demos = build_demos(kitchen, 200, RandomSource(73), n_frames=8, jitter=0.005)
    theta = net_init(velocity_net_sizes(kitchen, config), RandomSource(3))
    probe_rng = RandomSource(99)
    conds = np.stack([c for c, _ in demos[:64]])
    xs = np.stack([s.frames.reshape(-1) for _, s in demos[:64]])
    ts = np.asarray(1.0 - probe_rng.uniform(shape=64))
    eps = np.asarray(probe_rng.normal(shape=xs.shape))
    initial, _ = flow_matching_loss(theta, conds, xs, ts, eps)
    trained, history = sft_train(theta, demos, epochs=50, lr=3e-3, rng=RandomSource(4))
    final, _ = flow_matching_loss(trained, conds, xs, ts, eps)
    assert len(history) == 50
    assert final < 0.5 * initial


def test_sft_overfits_single_demo():
    from loopwm.microworld import Segment

    config = SamplerConfig(n_frames=2, frame_width=3)
    target = np.array([0.2, 0.8, 0.5, 0.4, 0.1, 0.9])
    seg = Segment(frames=target.reshape(2, 3))
    cond = np.array([1.0, 0.0, 0.5, 0.25])
    theta = net_init([6 + 1 + 4, 64, 64, 64, 6], RandomSource(5))
    theta, history = sft_train(theta, [(cond, seg)] * 64, epochs=600, lr=3e-3,
                               rng=RandomSource(6), batch_size=32)
    assert history[-1] < history[0]
    rng = RandomSource(85)
    for _ in range(5):
        z = np.asarray(rng.normal(shape=config.latent_width))
        out = sample_ode(theta, cond, z, config)
        assert np.max(np.abs(out.frames.reshape(-1) - target)) < 0.1


# bundle and checkpointing


def test_policy_bundle_sync(kitchen):
    config = SamplerConfig(n_frames=4, frame_width=len(kitchen.channels))
    reference = net_init(velocity_net_sizes(kitchen, config, hidden=8), RandomSource(12))
    bundle = PolicyBundle.from_reference(reference)
    bundle.theta.weights[0][0, 0] += 1.0
    assert bundle.theta_old.weights[0][0, 0] != bundle.theta.weights[0][0, 0]
    bundle.sync_old()
    assert bundle.theta_old.weights[0][0, 0] == bundle.theta.weights[0][0, 0]
    assert reference.weights[0][0, 0] == pytest.approx(bundle.theta.weights[0][0, 0] - 1.0)


def test_policy_checkpoint_roundtrip_and_mismatch(tmp_path, kitchen, workshop):
    config = SamplerConfig(n_frames=4, frame_width=len(kitchen.channels))
    theta = net_init(velocity_net_sizes(kitchen, config, hidden=8), RandomSource(13))
    path = tmp_path / "policy.ckpt"
    save_policy(path, theta, kitchen, config)
    loaded = load_policy(path, kitchen, config)
    for w0, w1 in zip(theta.weights, loaded.weights):
        np.testing.assert_array_equal(w0, w1)

    with pytest.raises(CheckpointError, match="domain_hash"):
        load_policy(path, workshop,
                    SamplerConfig(n_frames=4, frame_width=len(workshop.channels)))
    with pytest.raises(CheckpointError, match="k_steps"):
        load_policy(path, kitchen,
                    SamplerConfig(k_steps=20, n_frames=4, frame_width=len(kitchen.channels)))
    (tmp_path / "policy.ckpt.json").unlink()
    with pytest.raises(CheckpointError, match="manifest"):
        load_policy(path, kitchen, config)


def test_build_demos_chain_from_initial_state(kitchen):
    demos = build_demos(kitchen, 40, RandomSource(91), n_frames=6)
    width = context_width(kitchen)
    d = len(kitchen.channels)
    assert len(demos) == 40
    for cond, seg in demos:
        assert cond.shape == (width,)
        assert seg.frames.shape == (6, d)
        assert np.all(np.isfinite(cond))
    np.testing.assert_array_equal(
        demos[0][0][:d], encode_state(kitchen, kitchen.initial_state()))
    again = build_demos(kitchen, 40, RandomSource(91), n_frames=6)
    for (c0, s0), (c1, s1) in zip(demos, again):
        np.testing.assert_array_equal(c0, c1)
        np.testing.assert_array_equal(s0.frames, s1.frames)
