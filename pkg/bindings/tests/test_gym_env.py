"""The Gym-style wrapper: ids, spaces, lifecycle."""

import numpy as np
import pytest

from segar import EpisodeError, save_template, builtin_template
from segar_bindings import BindingError, HandleError, SegarEnv, SpaceSpec, make


def test_make_builtin_id():
    env = make("Segar-puttputt-v1", seed=3)
    assert env.id == "Segar-puttputt-v1"
    obs = env.reset()
    assert env.observation_space == SpaceSpec(tuple(obs.shape), "float64")
    assert env.action_space.shape == (2,)
    assert env.action_space.low == -1.0 and env.action_space.high == 1.0
    env.close()


def test_make_with_difficulty_in_id():
    env = make("Segar-billiards-medium-v1", seed=0)
    obs, reward, done, info = env.step((0.1, 0.1))
    assert info["t"] == 1
    env.close()


def test_bad_ids_rejected():
    for bad in ("puttputt", "Segar-puttputt", "Segar-puttputt-v2", "Env-x-v1"):
        with pytest.raises(BindingError, match="environment id"):
            make(bad)
    with pytest.raises(BindingError, match="neither a builtin"):
        make("Segar-nonexistent-v1")


def test_template_path_overrides_id(tmp_path):
    path = tmp_path / "custom.json"
    save_template(builtin_template("invisiball", "hard"), str(path))
    env = make("Segar-custom-v1", template_path=str(path), seed=1)
    assert env.handle.template_path == str(path)
    env.reset()
    env.step((0.0, 0.0))
    # invisiball hides the controlled position from t >= 1
    assert env.handle.last_obs_shape[0] == env.observation_space.shape[0] - 2
    env.close()


def test_observation_mode_override_pixels():
    env = make("Segar-puttputt-v1", seed=2, observation_mode="pixels",
               resolution=32)
    obs = env.reset()
    assert obs.shape == (32, 32, 3) and obs.dtype == np.uint8
    assert env.observation_space == SpaceSpec((32, 32, 3), "uint8", 0.0, 255.0)
    frame = env.render()
    assert frame.shape == (32, 32, 3)  # render matches configured resolution
    env.close()


def test_multimodal_space_is_dict():
    env = make("Segar-puttputt-v1", observation_mode="multimodal",
               resolution=16)
    obs = env.reset()
    assert set(obs) == {"state", "pixels"}
    assert set(env.observation_space) == {"state", "pixels"}
    assert env.observation_space["pixels"].shape == (16, 16, 3)
    assert env.observation_space["state"].dtype == "float64"
    env.close()


def test_step_after_done_raises_engine_error():
    env = make("Segar-puttputt-v1", seed=5)
    env.reset()
    done = False
    for _ in range(300):  # max_steps is 200; truncation must arrive
        if done:
            break
        _, _, done, _ = env.step((0.0, 0.0))
    assert done
    with pytest.raises(EpisodeError):
        env.step((0.0, 0.0))
    env.close()


def test_context_manager_closes():
    with make("Segar-puttputt-v1") as env:
        env.reset()
        assert env.handle.open
    assert not env.handle.open
    with pytest.raises(HandleError):
        env.step((0.0, 0.0))


def test_repr_names_state():
    env = make("Segar-puttputt-v1")
    assert "open" in repr(env)
    env.close()
    assert "closed" in repr(env)


def test_isolated_construction_no_reset_needed():
    # step straight after construction: the episode starts at the task state
    env = make("Segar-puttputt-v1", seed=8)
    obs, reward, done, info = env.step((0.5, 0.5))
    assert info["t"] == 1
    env.close()
