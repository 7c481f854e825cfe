import numpy as np
import pytest

from m3t import (
    DeepQAgent,
    Dense,
    EpsilonSchedule,
    Module,
    NonFinite,
    ReplayBuffer,
    ShapeMismatch,
    Transition,
    Underfilled,
    ddqn_target,
    dqn_target,
    epsilon,
)

X = (np.ones(1),)


class TupleNet(Module):
    """Linear value network over a single-array state."""

    def __init__(self, n_in=1, n_actions=2, seed=0):
        super().__init__()
        self.dense = self.add_module("dense", Dense(n_in, n_actions, rng=np.random.default_rng(seed)))

    def forward(self, state):
        return self.dense.forward(state[0])

    def backward(self, grad):
        return self.dense.backward(grad)


def _transition(action=0, reward=0.0, terminal=False, state=X):
    return Transition(state, action, reward, state, terminal)


def _const(values):
    values = np.array(values, dtype=float)
    return lambda states: np.repeat(values[None], len(states[0]), axis=0)


def test_ring_buffer_overwrites_oldest():
    buf = ReplayBuffer(10000)
    for k in range(10001):
        buf.push(_transition(action=k))
    assert len(buf) == 10000
    assert buf._items[0].action == 10000
    assert buf._items[1].action == 1


def test_sampling_deterministic():
    a, b = ReplayBuffer(50, seed=4), ReplayBuffer(50, seed=4)
    for k in range(50):
        a.push(_transition(action=k))
        b.push(_transition(action=k))
    np.testing.assert_array_equal(a.sample_indices(32), b.sample_indices(32))


def test_sampling_uniform():
    buf = ReplayBuffer(10, seed=0)
    for k in range(10):
        buf.push(_transition(action=k))
    counts = np.bincount([t.action for t in buf.sample(10000)], minlength=10)
    chi2 = np.sum((counts - 1000.0) ** 2 / 1000.0)
    assert chi2 < 27.88


def test_underfilled():
    buf = ReplayBuffer(10)
    buf.push(_transition())
    with pytest.raises(Underfilled):
        buf.sample(2)
    with pytest.raises(ValueError):
        ReplayBuffer(0)


def test_transition_errors():
    with pytest.raises(NonFinite):
        _transition(reward=float("nan"))
    with pytest.raises(ValueError):
        Transition(X, 0, 0.0, X, False, steps=0)


def test_epsilon_schedule():
    assert epsilon(0) == 1.0
    assert epsilon(4) == 1.0
    assert epsilon(5) == pytest.approx(0.99)
    assert epsilon(1_000_000) == 0.05
    with pytest.raises(ValueError):
        epsilon(-1)
    assert EpsilonSchedule(decay=0.5, every=1, minimum=0.2)(1) == 0.5


def test_epsilon_from_config(tiny_config):
    schedule = EpsilonSchedule.from_config(tiny_config.override(epsilon_every=2))
    assert schedule(2) == pytest.approx(tiny_config.epsilon_decay)


def test_ddqn_target_crafted():
    batch = [_transition(reward=1.0)]
    online, target = _const([1.0, 2.0]), _const([5.0, 3.0])
    assert ddqn_target(batch, online, target, 0.5)[0] == pytest.approx(1.0 + 0.5 * 3.0)
    assert dqn_target(batch, target, 0.5)[0] == pytest.approx(1.0 + 0.5 * 5.0)
    assert ddqn_target(batch, online, target, 0.0)[0] == 1.0


def test_target_terminal():
    batch = [_transition(reward=2.0, terminal=True), _transition(reward=2.0)]
    out = ddqn_target(batch, _const([1.0, 2.0]), _const([5.0, 3.0]), 0.9)
    np.testing.assert_allclose(out, [2.0, 2.0 + 0.9 * 3.0])
    np.testing.assert_allclose(dqn_target(batch, _const([5.0, 3.0]), 0.9), [2.0, 6.5])


def test_target_shape_mismatch():
    batch = [_transition()]
    with pytest.raises(ShapeMismatch):
        ddqn_target(batch, _const([1.0, 2.0]), _const([1.0, 2.0, 3.0]))
    with pytest.raises(ShapeMismatch):
        dqn_target(batch, lambda s: np.zeros(3))


def _agent(**kwargs):
    args = dict(gamma=0.9, lr=1e-2, capacity=100, batch_size=8, target_sync=1000, seed=0)
    args.update(kwargs)
    return DeepQAgent(TupleNet(), 2, **args)


def test_learn_underfilled():
    agent = _agent()
    agent.observe(_transition())
    assert agent.learn() is None
    assert agent.updates == 0


@pytest.mark.parametrize("double", [True, False])
def test_toy_convergence(double):
    agent = _agent(double=double)
    for _ in range(20):
        agent.observe(_transition(action=0, reward=1.0, terminal=True))
        agent.observe(_transition(action=1, reward=0.0, terminal=True))
    for _ in range(400):
        agent.learn()
    q = agent.q_values(X)
    assert q[0] == pytest.approx(1.0, abs=0.05)
    assert q[1] == pytest.approx(0.0, abs=0.05)
    assert agent.act(X) == 0


def test_zero_loss_fixed_point():
    agent = _agent()
    q = agent.q_values(X)
    for a in range(2):
        for _ in range(8):
            agent.observe(_transition(action=a, reward=float(q[a]), terminal=True))
    before = agent.online.state_dict()
    loss = agent.learn()
    assert loss == pytest.approx(0.0, abs=1e-20)
    for name, value in agent.online.state_dict().items():
        np.testing.assert_allclose(value, before[name], atol=1e-12)


def test_target_sync():
    agent = _agent(target_sync=3)
    for k in range(16):
        agent.observe(_transition(action=k % 2, reward=1.0))
    agent.learn()
    assert not np.allclose(agent.q_values(X), agent.target.forward((X[0][None],))[0])
    agent.learn()
    agent.learn()
    assert agent.updates == 3
    np.testing.assert_array_equal(
        agent.q_values(X), agent.target.forward((X[0][None],))[0]
    )


def test_act_exploration():
    agent = _agent()
    actions = {agent.act(X, eps=1.0) for _ in range(50)}
    assert actions == {0, 1}
    greedy = int(np.argmax(agent.q_values(X)))
    assert all(agent.act(X, eps=0.0) == greedy for _ in range(10))


def test_save_load(tmp_path):
    agent = _agent(target_sync=2)
    for k in range(16):
        agent.observe(_transition(action=k % 2, reward=1.0))
    for _ in range(3):
        agent.learn()
    path = str(tmp_path / "agent.npz")
    agent.save(path)
    other = DeepQAgent(TupleNet(seed=5), 2)
    other.load(path)
    assert other.updates == 3
    np.testing.assert_array_equal(other.q_values(X), agent.q_values(X))
