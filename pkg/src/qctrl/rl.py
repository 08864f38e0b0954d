"""REINFORCE with a Gaussian policy for g -> r transfer.

One episode splits [0, T] into ``n_steps`` equal intervals. At each step the
agent sees 9 real numbers describing the (g, e, r) block of the density
matrix, samples a = (a_S, a_P) around the network mean, and holds the
controls Omega_0 / (1 + exp(-3 a)) for one interval. The only reward is
rho_rr(T) at the end.

All agents of a batch run the same policy in lock-step; their noise comes
from one counter-based stream per episode, row ``b`` belonging to agent ``b``,
so sampled actions do not depend on how the batch is scheduled.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dynamics import GROUND_AMPLITUDES, E, G, R, PulseSchedule, amplitude_propagators
from .mlp import SGD, Adam, PolicyNetwork

OBS_DIM = 9
ACTION_DIM = 2
SLOPE = 3.0


@dataclass(frozen=True)
class TrainerConfig:
    sigma: float = 0.5
    batch_size: int = 200
    learning_rate: float = 0.05
    n_steps: int = 30
    discount: float = 1.0
    optimizer: str = "sgd"
    hidden: tuple = (100, 50)
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    max_episodes: int = 2000
    seed: int = 0
    patience: int | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must be in [0, 1]")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.max_episodes < 0:
            raise ValueError("max_episodes must be >= 0")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "adam_betas", tuple(float(b) for b in self.adam_betas))

    def to_dict(self):
        data = asdict(self)
        data["hidden"] = list(self.hidden)
        data["adam_betas"] = list(self.adam_betas)
        return data


PRESETS = {
    "reinforce-sgd": TrainerConfig(
        sigma=0.5, batch_size=200, learning_rate=0.05, hidden=(100, 50), optimizer="sgd",
    ),
    "reinforce-adam": TrainerConfig(
        sigma=0.5, batch_size=2, learning_rate=1e-3, hidden=(100, 50, 30), optimizer="adam",
    ),
}


def preset(name, **overrides):
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


# -- MDP pieces ----------------------------------------------------------------

def observe(state):
    """(rho_gg, rho_rr, rho_ee, Re/Im rho_ge, Re/Im rho_gr, Re/Im rho_er)."""
    rho = np.asarray(state)
    return np.array([
        rho[G, G].real, rho[R, R].real, rho[E, E].real,
        rho[G, E].real, rho[G, E].imag,
        rho[G, R].real, rho[G, R].imag,
        rho[E, R].real, rho[E, R].imag,
    ])


def observe_amplitudes(psi):
    """``observe`` of psi psi^dagger for a batch of (g, e, r) amplitudes."""
    psi = np.atleast_2d(psi)
    g, e, r = psi[:, G], psi[:, E], psi[:, R]
    ge = g * e.conj()
    gr = g * r.conj()
    er = e * r.conj()
    return np.column_stack([
        np.abs(g) ** 2, np.abs(r) ** 2, np.abs(e) ** 2,
        ge.real, ge.imag, gr.real, gr.imag, er.real, er.imag,
    ])


def policy_forward(net, s):
    mu = net.forward(s)
    return mu[0] if np.ndim(s) == 1 else mu


def sample_action(mu, sigma, rng):
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    mu = np.asarray(mu, dtype=float)
    return mu + sigma * rng.standard_normal(mu.shape)


def log_density(a, mu, sigma):
    """Log of the product of independent Normal(mu_i, sigma^2) densities."""
    diff = np.asarray(a, dtype=float) - np.asarray(mu, dtype=float)
    return float(np.sum(-0.5 * (diff / sigma) ** 2 - np.log(np.sqrt(2 * np.pi) * sigma)))


def action_to_controls(a, omega_0):
    """Map a = (a_S, a_P) to (Omega_S, Omega_P) in (0, omega_0)."""
    if not omega_0 > 0:
        raise ValueError("omega_0 must be > 0")
    a = np.asarray(a, dtype=float)
    controls = omega_0 / (1.0 + np.exp(-SLOPE * a))
    return controls[..., 0], controls[..., 1]


# -- episodes ------------------------------------------------------------------

@dataclass
class EpisodeTrace:
    observations: np.ndarray    # (n_steps, 9)
    actions: np.ndarray         # (n_steps, 2), columns (a_S, a_P)
    reward: float
    rewards: np.ndarray = field(default=None)   # R_1..R_N, zero except the last

    def __post_init__(self):
        if self.rewards is None:
            rewards = np.zeros(len(self.actions))
            rewards[-1] = self.reward
            self.rewards = rewards

    def returns(self, discount=1.0):
        return compute_returns(self.rewards, discount)


def compute_returns(rewards, discount):
    """G_t = sum_k discount^k R_{t+k+1} for rewards R_1..R_N (index t = 0..N-1)."""
    rewards = np.asarray(rewards, dtype=float)
    out = np.zeros_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + discount * acc
        out[t] = acc
    return out


def _rollout_batch(net, params, n_steps, sigma, noise):
    """Run ``len(noise)`` agents; noise has shape (batch, n_steps, 2)."""
    batch = noise.shape[0]
    dt = params.t_final / n_steps
    psi = np.tile(GROUND_AMPLITUDES, (batch, 1))
    observations = np.empty((batch, n_steps, OBS_DIM))
    actions = np.empty((batch, n_steps, ACTION_DIM))
    for j in range(n_steps):
        obs = observe_amplitudes(psi)
        a = net.forward(obs) + sigma * noise[:, j]
        omega_s, omega_p = action_to_controls(a, params.omega_max)
        props = amplitude_propagators(params, omega_p, omega_s, dt)
        psi = np.einsum("bij,bj->bi", props, psi)
        observations[:, j] = obs
        actions[:, j] = a
    rewards = np.minimum(np.abs(psi[:, R]) ** 2, 1.0)
    return observations, actions, rewards


def rollout(net, config, params, rng):
    """One episode from |g><g| with ``omega_0 = params.omega_max``."""
    noise = rng.standard_normal((1, config.n_steps, ACTION_DIM))
    obs, actions, rewards = _rollout_batch(net, params, config.n_steps, config.sigma, noise)
    return EpisodeTrace(obs[0], actions[0], float(rewards[0]))


def actions_to_schedule(actions, params):
    omega_s, omega_p = action_to_controls(actions, params.omega_max)
    return PulseSchedule.constant(omega_p, omega_s, params.t_final)


# -- learning ------------------------------------------------------------------

def surrogate_gradient(net, batch, config):
    """Gradient of sum_j (G_j / 2 sigma^2) |a_j - mu(s_j)|^2, averaged over traces.

    Returns ``(grads, cost)`` with ``grads`` in ``net.params()`` order.
    """
    if not batch:
        raise ValueError("batch must not be empty")
    obs = np.concatenate([t.observations for t in batch])
    actions = np.concatenate([t.actions for t in batch])
    returns = np.concatenate([t.returns(config.discount) for t in batch])
    return _surrogate_gradient(net, obs, actions, returns, len(batch), config.sigma)


def _surrogate_gradient(net, obs, actions, returns, n_traces, sigma):
    mu, cache = net.forward_cache(obs)
    diff = actions - mu
    weight = returns[:, None] / (sigma ** 2 * n_traces)
    cost = 0.5 * float(np.sum(weight * diff ** 2))
    return net.backward(cache, -weight * diff), cost


def make_optimizer(config):
    if config.optimizer == "adam":
        return Adam(config.learning_rate, config.adam_betas, config.adam_eps)
    return SGD(config.learning_rate)


def reinforce_update(net, batch, config, optimizer=None):
    """One descent step on the surrogate cost; returns the updated copy of ``net``.

    Pass the same ``optimizer`` across calls to keep Adam's moment estimates.
    """
    grads, _ = surrogate_gradient(net, batch, config)
    new = net.copy()
    (optimizer or make_optimizer(config)).step(new.params(), grads)
    return new


@dataclass
class BestPulses:
    actions: np.ndarray   # (n_steps, 2), columns (a_S, a_P)
    reward: float
    episode: int
    agent: int

    def schedule(self, params):
        return actions_to_schedule(self.actions, params)

    def to_dict(self, params):
        return {
            "reward": float(self.reward),
            "episode": int(self.episode),
            "agent": int(self.agent),
            "actions": [[float(x) for x in row] for row in self.actions],
            "schedule": self.schedule(params).to_dict(),
        }


@dataclass
class TrainingResult:
    net: PolicyNetwork
    best: BestPulses | None
    curve: list   # (episode, mean_reward, best_reward) rows


def _streams(seed):
    init_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.Philox(noise_seq)


def episode_noise(base, episode, batch_size, n_steps):
    """Standard normals for one episode from a disjoint counter-based stream."""
    rng = np.random.Generator(base.jumped(episode + 1))
    return rng.standard_normal((batch_size, n_steps, ACTION_DIM))


def train(config, params, callback=None):
    """Batched REINFORCE; deterministic given ``config.seed``.

    ``callback(episode, mean_reward, best_reward)`` is invoked once per episode.
    """
    init_rng, noise_base = _streams(config.seed)
    net = PolicyNetwork.create(config.hidden, OBS_DIM, ACTION_DIM, rng=init_rng)
    optimizer = make_optimizer(config)
    best = None
    curve = []
    since_improved = 0
    for episode in range(config.max_episodes):
        noise = episode_noise(noise_base, episode, config.batch_size, config.n_steps)
        obs, actions, rewards = _rollout_batch(net, params, config.n_steps, config.sigma, noise)
        agent = int(np.argmax(rewards))
        if best is None or rewards[agent] > best.reward:
            best = BestPulses(actions[agent].copy(), float(rewards[agent]), episode, agent)
            since_improved = 0
        else:
            since_improved += 1
        mean_reward = float(np.mean(rewards))
        curve.append((episode, mean_reward, best.reward))
        if callback is not None:
            callback(episode, mean_reward, best.reward)

        n_steps = config.n_steps
        step_rewards = np.zeros((config.batch_size, n_steps))
        step_rewards[:, -1] = rewards
        returns = np.array([compute_returns(r, config.discount) for r in step_rewards])
        grads, _ = _surrogate_gradient(
            net, obs.reshape(-1, OBS_DIM), actions.reshape(-1, ACTION_DIM),
            returns.reshape(-1), config.batch_size, config.sigma,
        )
        optimizer.step(net.params(), grads)
        if config.patience is not None and since_improved >= config.patience:
            break
    return TrainingResult(net, best, curve)


def moving_average(values, window):
    values = np.asarray(values, dtype=float)
    if len(values) < window:
        return np.array([])
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")
