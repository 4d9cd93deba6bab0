import numpy as np
import pytest

from conftest import load_corpus
from karelsynth.dsl import parse
from karelsynth.search import (CemConfig, behavior_reconstruction_reward,
                               cem_search, decayed_sigma, random_search)


def identity(latents: np.ndarray) -> list:
    return [z for z in latents]


def quadratic_reward(target: np.ndarray):
    def reward(z: np.ndarray) -> float:
        return -float(np.sum((z - target) ** 2))
    return reward


def test_cem_recovers_quadratic_optimum_all_seeds():
    dim = 16
    target = np.full(dim, 0.5)
    cfg = CemConfig(population=32, sigma=0.25, elite_fraction=0.1,
                    sigma_decay=True, init_distribution="normal",
                    max_iters=300, max_reward=None, latent_dim=dim)
    for seed in range(5):
        result = cem_search(identity, quadratic_reward(target), cfg, seed)
        final_center = result.centers[-1]
        assert np.linalg.norm(final_center - target) < 0.1 * np.sqrt(dim)


def test_equal_rewards_give_unweighted_elite_mean():
    dim = 4
    cfg = CemConfig(population=8, sigma=0.5, elite_fraction=0.5,
                    max_iters=1, max_reward=None, latent_dim=dim,
                    init_distribution="normal")
    seen = {}

    def constant_reward(z):
        seen[z.tobytes()] = z
        return 0.5

    result = cem_search(identity, constant_reward, cfg, seed=3)
    # reconstruct the population from the log is awkward; instead check the
    # center against the mean of the four elites (stable sort = first four)
    latents = [z for key, z in seen.items()]
    population = np.array(latents[:8])
    assert np.allclose(result.centers[0], population[:4].mean(axis=0))


def test_monotone_reward_improves_population():
    dim = 8
    cfg = CemConfig(population=16, sigma=0.25, elite_fraction=0.25,
                    max_iters=50, max_reward=None, latent_dim=dim,
                    init_distribution="normal")
    result = cem_search(identity, lambda z: float(z[0]), cfg, seed=0)
    means = [row.mean_reward for row in result.log]
    assert means[-1] > means[0] + 1.0


def test_deterministic_under_seed():
    dim = 6
    cfg = CemConfig(population=8, sigma=0.25, elite_fraction=0.25,
                    max_iters=20, max_reward=None, latent_dim=dim)
    r1 = cem_search(identity, quadratic_reward(np.zeros(dim)), cfg, seed=9)
    r2 = cem_search(identity, quadratic_reward(np.zeros(dim)), cfg, seed=9)
    assert r1.best_reward == r2.best_reward
    assert all(np.array_equal(a, b) for a, b in zip(r1.centers, r2.centers))
    assert [row.mean_reward for row in r1.log] == [row.mean_reward for row in r2.log]


def test_evaluation_order_invariance():
    # rewards are computed per candidate; permuting the reward function's
    # internal evaluation order must not matter because it is pure
    dim = 4
    cfg = CemConfig(population=8, sigma=0.3, elite_fraction=0.25,
                    max_iters=10, max_reward=None, latent_dim=dim)
    calls = []

    def recording_reward(z):
        calls.append(z.copy())
        return -float(np.sum(z ** 2))

    r1 = cem_search(identity, recording_reward, cfg, seed=4)
    # replay with a reward that shuffles its work order internally
    table = {z.tobytes(): -float(np.sum(z ** 2)) for z in calls}
    r2 = cem_search(identity, lambda z: table[z.tobytes()], cfg, seed=4)
    assert np.array_equal(r1.centers[-1], r2.centers[-1])


def test_sigma_decay_schedule():
    cfg = CemConfig(sigma=0.5, sigma_decay=True)
    values = [decayed_sigma(cfg, t) for t in range(0, 1001, 50)]
    assert values[0] == 0.5
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert decayed_sigma(cfg, 500) == pytest.approx(0.1)
    assert decayed_sigma(cfg, 900) == 0.1
    assert decayed_sigma(CemConfig(sigma=0.5, sigma_decay=False), 700) == 0.5


def test_best_so_far_non_decreasing():
    dim = 6
    cfg = CemConfig(population=8, sigma=0.4, elite_fraction=0.25,
                    max_iters=40, max_reward=None, latent_dim=dim)
    result = cem_search(identity, quadratic_reward(np.ones(dim)), cfg, seed=2)
    bests = [row.best_reward for row in result.log]
    assert all(a <= b for a, b in zip(bests, bests[1:]))
    assert result.best_reward == bests[-1]


def test_convergence_on_max_reward_plateau():
    dim = 4
    cfg = CemConfig(population=8, sigma=0.1, elite_fraction=0.5,
                    max_iters=100, convergence_patience=10,
                    max_reward=1.0, latent_dim=dim)
    result = cem_search(identity, lambda z: 1.0, cfg, seed=0)
    assert result.converged
    assert result.iterations == 10


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        CemConfig(init_distribution="cauchy").validate()


def test_init_distributions():
    from karelsynth.search import _draw_init
    rng = np.random.default_rng(0)
    ones = _draw_init(CemConfig(init_distribution="ones", latent_dim=5), rng)
    assert np.array_equal(ones, np.ones(5))
    small = _draw_init(CemConfig(init_distribution="small_normal", latent_dim=1000), rng)
    assert 0.05 < np.std(small) < 0.2
    normal = _draw_init(CemConfig(init_distribution="normal", latent_dim=1000), rng)
    assert 0.8 < np.std(normal) < 1.2


# --- random search ---------------------------------------------------------------


def test_random_search_zero_sigma_returns_init():
    result = random_search(identity, lambda z: float(z.sum()), 1, 0.0,
                           "ones", seed=0, latent_dim=3)
    assert np.array_equal(result.best_latent, np.ones(3))


def test_random_search_returns_argmax():
    rewards_seen = []

    def reward(z):
        rewards_seen.append(float(z[0]))
        return float(z[0])

    result = random_search(identity, reward, 16, 0.5, "normal", 1, 4)
    assert result.best_reward == max(rewards_seen)


def test_best_of_64_beats_best_of_8_on_average():
    def reward(z):
        return float(z[0])

    r8 = [random_search(identity, reward, 8, 0.5, "small_normal", s, 4).best_reward
          for s in range(100)]
    r64 = [random_search(identity, reward, 64, 0.5, "small_normal", s, 4).best_reward
           for s in range(100)]
    assert np.mean(r64) > np.mean(r8)


# --- reconstruction reward --------------------------------------------------------


def test_reconstruction_reward_reflexive_max():
    target = load_corpus("target_while")
    reward = behavior_reconstruction_reward(target)
    assert reward(target) == pytest.approx(1.1)


def test_reconstruction_reward_mismatch_floor():
    target = parse("DEF run m( move m)")
    candidate = parse("DEF run m( turnLeft m)")
    reward = behavior_reconstruction_reward(target)
    assert reward(candidate) == pytest.approx(0.1)


def test_reconstruction_reward_fixed_states():
    target = load_corpus("target_while")
    reward_a = behavior_reconstruction_reward(target)
    reward_b = behavior_reconstruction_reward(target)
    probe = load_corpus("solution_stairclimber")
    assert reward_a(probe) == reward_b(probe)