"""Tabular Q-learning and actor-critic deep Q-learning, numpy only.

Both learners follow the scikit-learn estimator conventions: constructor
arguments are hyper-parameters (``get_params``/``set_params`` work), learned
state lives in trailing-underscore attributes, and ``predict`` returns the
greedy action for each row of a state matrix.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .agents import N_ACTIONS, Action
from .errors import ConfigurationError

# ----------------------------------------------------------------- exploration


def epsilon_schedule(slot: int, breakpoints=(500, 800), values=(1.0, 0.2, 0.01)) -> float:
    """Piecewise-constant exploration rate; a breakpoint opens the next segment."""
    if slot < 0:
        raise ConfigurationError("slot must be >= 0")
    for edge, eps in zip(breakpoints, values):
        if slot < edge:
            return float(eps)
    return float(values[len(breakpoints)])


def select_action(values, epsilon: float, rng: np.random.Generator) -> Action:
    """Epsilon-greedy; ties resolve in action order T, R, CJ, AJ, W."""
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigurationError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon > 0 and rng.random() < epsilon:
        return Action(int(rng.integers(N_ACTIONS)))
    return Action(int(np.argmax(values)))


# -------------------------------------------------------------- tabular Q


@dataclass
class QTable:
    alpha: float = 0.1
    gamma: float = 0.9
    values: dict = field(default_factory=lambda: defaultdict(lambda: np.zeros(N_ACTIONS)))

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigurationError("alpha must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ConfigurationError("gamma must lie in [0, 1)")

    @staticmethod
    def key(state):
        if isinstance(state, (int, np.integer, str, tuple)):
            return state
        return np.asarray(state, dtype=float).tobytes()

    def row(self, state) -> np.ndarray:
        k = self.key(state)
        if k in self.values:
            return self.values[k]
        return np.zeros(N_ACTIONS)

    def __getitem__(self, item):
        state, action = item
        return float(self.row(state)[int(action)])


def q_update(table: QTable, s, a, p: float, s_next) -> QTable:
    """``Q(s,a) <- (1-alpha) Q(s,a) + alpha (p + gamma max_b Q(s',b))`` in place."""
    target = p + table.gamma * float(np.max(table.row(s_next)))
    row = table.values[table.key(s)]
    row[int(a)] = (1.0 - table.alpha) * row[int(a)] + table.alpha * target
    return table


# ------------------------------------------------------------------ networks


def init_network(n_inputs: int, hidden=(64, 64), n_outputs: int = N_ACTIONS,
                 rng: np.random.Generator | None = None) -> list:
    """Glorot-uniform weights, zero biases: ``[W1, b1, W2, b2, W3, b3]``."""
    rng = rng or np.random.default_rng()
    sizes = [n_inputs, *hidden, n_outputs]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def softmax(z):
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _forward(params, x):
    W1, b1, W2, b2, W3, b3 = params
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != W1.shape[0]:
        raise ConfigurationError(f"input length {x.shape[-1]} != network input {W1.shape[0]}")
    z1 = x @ W1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ W2 + b2
    a2 = np.maximum(z2, 0.0)
    out = a2 @ W3 + b3
    return out, (x, z1, a1, z2, a2)


def fnn_forward(params, x, head: str = "critic") -> np.ndarray:
    """Two ReLU hidden layers then an affine head; ``head='actor'`` adds softmax."""
    out, _ = _forward(params, x)
    if head == "actor":
        return softmax(out)
    if head != "critic":
        raise ConfigurationError(f"unknown head {head!r}")
    return out


def backprop(params, cache, dout) -> list:
    """Gradient of ``dout . output`` w.r.t. every parameter, single sample."""
    W1, b1, W2, b2, W3, b3 = params
    x, z1, a1, z2, a2 = cache
    dout = np.asarray(dout, dtype=float)
    dW3 = np.outer(a2, dout)
    dz2 = (W3 @ dout) * (z2 > 0)
    dW2 = np.outer(a1, dz2)
    dz1 = (W2 @ dz2) * (z1 > 0)
    dW1 = np.outer(x, dz1)
    return [dW1, dz1, dW2, dz2, dW3, dout]


@dataclass
class Experience:
    state: np.ndarray
    action: int
    utility: float
    next_state: np.ndarray


@dataclass
class ActorCriticParams:
    actor: list
    critic: list
    alpha: float = 1e-3  # actor learning rate
    beta: float = 1e-3  # critic learning rate
    gamma: float = 0.9

    @classmethod
    def initialize(cls, n_inputs, hidden=(64, 64), alpha=1e-3, beta=1e-3, gamma=0.9, rng=None):
        rng = rng or np.random.default_rng()
        actor = init_network(n_inputs, hidden, rng=rng)
        critic = init_network(n_inputs, hidden, rng=rng)
        return cls(actor, critic, alpha, beta, gamma)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
            "actor": [p.tolist() for p in self.actor],
            "critic": [p.tolist() for p in self.critic],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ActorCriticParams":
        return cls([np.asarray(p, dtype=float) for p in d["actor"]],
                   [np.asarray(p, dtype=float) for p in d["critic"]],
                   d["alpha"], d["beta"], d["gamma"])

    def copy(self) -> "ActorCriticParams":
        return ActorCriticParams([p.copy() for p in self.actor], [p.copy() for p in self.critic],
                                 self.alpha, self.beta, self.gamma)


def td_target(critic, exp: Experience, gamma: float) -> float:
    return float(exp.utility + gamma * np.max(fnn_forward(critic, exp.next_state)))


def critic_loss(critic, exp: Experience, gamma: float) -> float:
    q = fnn_forward(critic, exp.state)[exp.action]
    return (td_target(critic, exp, gamma) - q) ** 2


def critic_gradient(critic, exp: Experience):
    """``grad_w Q_w(s, a)`` and ``Q_w(s, a)``."""
    out, cache = _forward(critic, exp.state)
    onehot = np.zeros(out.shape[-1])
    onehot[exp.action] = 1.0
    return backprop(critic, cache, onehot), float(out[exp.action])


def clip_factor(coef: float, grads, max_norm) -> float:
    """Shrink factor keeping ``|coef| * ||grads||`` within ``max_norm`` (None: no clipping)."""
    if max_norm is None:
        return 1.0
    norm = abs(coef) * np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    return 1.0 if norm <= max_norm else max_norm / norm


def critic_update(critic, exp: Experience, gamma: float, beta: float, max_norm=None) -> list:
    """Semi-gradient TD step: ``w + beta (target - Q_w(s,a)) grad Q_w(s,a)``."""
    if not beta > 0:
        raise ConfigurationError("critic learning rate must be > 0")
    target = td_target(critic, exp, gamma)
    grads, q = critic_gradient(critic, exp)
    delta = target - q
    delta *= clip_factor(delta, grads, max_norm)
    return [w + beta * delta * g for w, g in zip(critic, grads)]


def log_policy_gradient(actor, state, action: int):
    """``grad_theta log pi_theta(s, a)`` and ``pi_theta(s, .)``."""
    logits, cache = _forward(actor, state)
    pi = softmax(logits)
    dout = -pi
    dout[action] += 1.0
    return backprop(actor, cache, dout), pi


def actor_update(actor, critic, exp: Experience, alpha: float, max_norm=None) -> list:
    """Policy-gradient step weighted by the critic's ``Q_w(s, a)``."""
    if not alpha > 0:
        raise ConfigurationError("actor learning rate must be > 0")
    q = float(fnn_forward(critic, exp.state)[exp.action])
    grads, _ = log_policy_gradient(actor, exp.state, exp.action)
    q *= clip_factor(q, grads, max_norm)
    return [t + alpha * q * g for t, g in zip(actor, grads)]


class ReplayMemory:
    """FIFO ring buffer of experiences with uniform sampling."""

    def __init__(self, capacity: int = 10000, rng: np.random.Generator | None = None):
        if capacity < 1:
            raise ConfigurationError("replay capacity must be >= 1")
        self.capacity = capacity
        self.rng = rng or np.random.default_rng()
        self._items: list = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def store(self, exp: Experience) -> None:
        if len(self._items) < self.capacity:
            self._items.append(exp)
        else:
            self._items[self._next] = exp
        self._next = (self._next + 1) % self.capacity

    def oldest(self) -> Experience:
        return self._items[self._next % len(self._items)] if len(self._items) == self.capacity \
            else self._items[0]

    def sample(self, k: int) -> list:
        """``k`` draws with replacement."""
        if not self._items:
            raise ConfigurationError("cannot sample an empty replay memory")
        idx = self.rng.integers(len(self._items), size=k)
        return [self._items[i] for i in idx]


def replay_cycle(memory: ReplayMemory, batch_size: int, params: ActorCriticParams,
                 max_norm=None) -> ActorCriticParams:
    """Critic then actor update for each of ``batch_size`` sampled experiences."""
    for exp in memory.sample(batch_size):
        params.critic = critic_update(params.critic, exp, params.gamma, params.beta, max_norm)
        params.actor = actor_update(params.actor, params.critic, exp, params.alpha, max_norm)
    return params


# ----------------------------------------------------------------- learners


class ActorCriticLearner(BaseEstimator):
    """Per-node actor-critic agent with experience replay.

    ``remember`` stores a transition; ``end_episode`` runs one replay cycle.
    ``partial_fit`` does both for a batch of transitions.
    """

    def __init__(self, hidden=(64, 64), actor_lr=1e-3, critic_lr=1e-3, gamma=0.9,
                 memory_capacity=10000, batch_size=2, max_grad_norm=None, act_on="actor",
                 random_state=None):
        self.hidden = hidden
        self.max_grad_norm = max_grad_norm
        self.act_on = act_on
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.gamma = gamma
        self.memory_capacity = memory_capacity
        self.batch_size = batch_size
        self.random_state = random_state

    def initialize(self, n_features: int) -> "ActorCriticLearner":
        self.rng_ = np.random.default_rng(self.random_state)
        self.params_ = ActorCriticParams.initialize(
            n_features, tuple(self.hidden), self.actor_lr, self.critic_lr, self.gamma, self.rng_)
        self.memory_ = ReplayMemory(self.memory_capacity, self.rng_)
        self.n_features_in_ = n_features
        return self

    def _ensure(self, n_features):
        if not hasattr(self, "params_"):
            self.initialize(n_features)

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = check_array(X)
        return fnn_forward(self.params_.actor, X, head="actor")

    def q_values(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        return fnn_forward(self.params_.critic, check_array(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def act(self, state, epsilon: float) -> Action:
        # single-state fast path, skips validation
        if self.act_on == "critic":
            scores = fnn_forward(self.params_.critic, state)
        else:
            scores = fnn_forward(self.params_.actor, state, head="actor")
        return select_action(scores, epsilon, self.rng_)

    def remember(self, s, a, p, s_next) -> None:
        self._ensure(len(s))
        self.memory_.store(Experience(np.asarray(s, dtype=float), int(a), float(p),
                                      np.asarray(s_next, dtype=float)))

    def end_episode(self) -> None:
        if len(self.memory_):
            replay_cycle(self.memory_, self.batch_size, self.params_, self.max_grad_norm)

    def fit(self, X, actions, utilities, X_next) -> "ActorCriticLearner":
        """Fresh weights, then one ``partial_fit``."""
        self.initialize(check_array(X).shape[1])
        return self.partial_fit(X, actions, utilities, X_next)

    def partial_fit(self, X, actions, utilities, X_next) -> "ActorCriticLearner":
        X = check_array(X)
        X_next = check_array(X_next)
        self._ensure(X.shape[1])
        for s, a, p, s2 in zip(X, actions, utilities, X_next):
            self.remember(s, a, p, s2)
        self.end_episode()
        return self

    def observe(self, s, a, p, s_next) -> None:
        self.remember(s, a, p, s_next)

    def get_weights(self) -> dict:
        return self.params_.to_dict()

    def set_weights(self, d: dict) -> "ActorCriticLearner":
        self.params_ = ActorCriticParams.from_dict(d)
        return self

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.get_weights(), fh)


class ActorCriticBank:
    """Independent actor-critic agents for ``n_agents`` nodes, stepped together.

    Each agent owns its weights, replay memory and random stream, exactly as
    an :class:`ActorCriticLearner` would; the arithmetic is merely batched over
    the leading agent axis.
    """

    def __init__(self, n_agents: int, n_features: int, rngs, hidden=(64, 64), actor_lr=1e-3,
                 critic_lr=1e-3, gamma=0.9, memory_capacity=10000, batch_size=2, max_grad_norm=None,
                 act_on="actor"):
        if len(rngs) != n_agents:
            raise ConfigurationError("need one random stream per agent")
        if memory_capacity < 1:
            raise ConfigurationError("replay capacity must be >= 1")
        self.n_agents, self.n_features = n_agents, n_features
        self.rngs = list(rngs)
        self.alpha, self.beta, self.gamma = actor_lr, critic_lr, gamma
        self.capacity, self.batch_size = memory_capacity, batch_size
        self.max_grad_norm, self.act_on = max_grad_norm, act_on
        nets = [ActorCriticParams.initialize(n_features, tuple(hidden), rng=r) for r in self.rngs]
        self.actor = [np.stack([p.actor[k] for p in nets]) for k in range(6)]
        self.critic = [np.stack([p.critic[k] for p in nets]) for k in range(6)]
        self._s = np.zeros((n_agents, memory_capacity, n_features), dtype=np.uint8)
        self._s2 = np.zeros_like(self._s)
        self._a = np.zeros((n_agents, memory_capacity), dtype=np.int64)
        self._p = np.zeros((n_agents, memory_capacity))
        self.size = 0
        self._next = 0

    # batched network pieces
    @staticmethod
    def forward(params, X):
        W1, b1, W2, b2, W3, b3 = params
        z1 = np.matmul(X[:, None, :], W1)[:, 0] + b1
        a1 = np.maximum(z1, 0.0)
        z2 = np.matmul(a1[:, None, :], W2)[:, 0] + b2
        a2 = np.maximum(z2, 0.0)
        return np.matmul(a2[:, None, :], W3)[:, 0] + b3, (X, z1, a1, z2, a2)

    @staticmethod
    def backprop(params, cache, dout):
        _, _, W2, _, W3, _ = params
        x, z1, a1, z2, a2 = cache
        dz2 = np.matmul(W3, dout[:, :, None])[:, :, 0] * (z2 > 0)
        dz1 = np.matmul(W2, dz2[:, :, None])[:, :, 0] * (z1 > 0)
        return [x[:, :, None] * dz1[:, None, :], dz1, a1[:, :, None] * dz2[:, None, :], dz2,
                a2[:, :, None] * dout[:, None, :], dout]

    def policy(self, X) -> np.ndarray:
        return softmax(self.forward(self.actor, np.asarray(X, dtype=float))[0])

    def q_values(self, X) -> np.ndarray:
        return self.forward(self.critic, np.asarray(X, dtype=float))[0]

    def act(self, X, epsilon: float) -> np.ndarray:
        scores = self.q_values(X) if self.act_on == "critic" else self.policy(X)
        return np.array([int(select_action(scores[i], epsilon, self.rngs[i])) for i in range(self.n_agents)])

    def _clip(self, coef, grads):
        if self.max_grad_norm is None:
            return coef
        sq = sum(np.sum((g * g).reshape(self.n_agents, -1), axis=1) for g in grads)
        norm = np.abs(coef) * np.sqrt(sq)
        return coef * np.where(norm > self.max_grad_norm, self.max_grad_norm / np.maximum(norm, 1e-300), 1.0)

    def store(self, S, actions, utilities, S_next) -> None:
        k = self._next
        self._s[:, k] = S
        self._s2[:, k] = S_next
        self._a[:, k] = actions
        self._p[:, k] = utilities
        self._next = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def replay(self) -> None:
        """One replay cycle per agent: critic then actor step for each sampled experience."""
        if self.size == 0:
            return
        idx = np.array([r.integers(self.size, size=self.batch_size) for r in self.rngs])
        rows = np.arange(self.n_agents)
        for j in range(self.batch_size):
            pick = idx[:, j]
            s = self._s[rows, pick].astype(float)
            s2 = self._s2[rows, pick].astype(float)
            a = self._a[rows, pick]
            p = self._p[rows, pick]
            # critic: semi-gradient TD step
            target = p + self.gamma * self.forward(self.critic, s2)[0].max(axis=1)
            q, cache = self.forward(self.critic, s)
            onehot = np.zeros_like(q)
            onehot[rows, a] = 1.0
            delta = target - q[rows, a]
            grads = self.backprop(self.critic, cache, onehot)
            delta = self._clip(delta, grads)
            self.critic = [w + self.beta * _bcast(delta, g) * g for w, g in zip(self.critic, grads)]
            # actor: policy gradient weighted by the refreshed critic
            qa = self.forward(self.critic, s)[0][rows, a]
            logits, cache = self.forward(self.actor, s)
            dout = -softmax(logits)
            dout[rows, a] += 1.0
            grads = self.backprop(self.actor, cache, dout)
            qa = self._clip(qa, grads)
            self.actor = [t + self.alpha * _bcast(qa, g) * g for t, g in zip(self.actor, grads)]

    def agent_params(self, i: int) -> ActorCriticParams:
        return ActorCriticParams([w[i].copy() for w in self.actor], [w[i].copy() for w in self.critic],
                                 self.alpha, self.beta, self.gamma)


def _bcast(v, like):
    return v.reshape((-1,) + (1,) * (like.ndim - 1))


class TabularQLearner(BaseEstimator):
    """Online Q-learning over encoded states; updates every transition."""

    def __init__(self, learning_rate=0.1, gamma=0.9, random_state=None):
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.random_state = random_state

    def initialize(self, n_features: int) -> "TabularQLearner":
        self.rng_ = np.random.default_rng(self.random_state)
        self.table_ = QTable(self.learning_rate, self.gamma)
        self.n_features_in_ = n_features
        return self

    def q_values(self, X) -> np.ndarray:
        check_is_fitted(self, "table_")
        return np.array([self.table_.row(x) for x in check_array(X)])

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.q_values(X), axis=1)

    def act(self, state, epsilon: float) -> Action:
        return select_action(self.table_.row(state), epsilon, self.rng_)

    def observe(self, s, a, p, s_next) -> None:
        q_update(self.table_, s, a, p, s_next)

    def end_episode(self) -> None:
        pass

    def fit(self, X, actions, utilities, X_next) -> "TabularQLearner":
        self.initialize(check_array(X).shape[1])
        return self.partial_fit(X, actions, utilities, X_next)

    def partial_fit(self, X, actions, utilities, X_next) -> "TabularQLearner":
        X = check_array(X)
        if not hasattr(self, "table_"):
            self.initialize(X.shape[1])
        for s, a, p, s2 in zip(X, actions, utilities, check_array(X_next)):
            self.observe(s, a, p, s2)
        return self


def make_learner(kind: str, n_features: int, random_state, **kwargs):
    if kind == "actor_critic":
        return ActorCriticLearner(random_state=random_state, **kwargs).initialize(n_features)
    if kind == "tabular":
        return TabularQLearner(random_state=random_state, **kwargs).initialize(n_features)
    raise ConfigurationError(f"unknown learner kind {kind!r}")
