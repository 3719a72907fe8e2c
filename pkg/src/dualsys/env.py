"""Toy planar grasping environment with two interchangeable renderers.

A point hand moves on a 2-d workspace and carries a scalar aperture in
[-1, 1] where negative means closed.  Closing within the grasp threshold
of the target succeeds (+1); closing too early, inside the topple radius
but outside the grasp threshold, knocks the target over (-1).  An open
hand never ends the episode.  Observations come as a normalized state
vector or as a small grayscale image from one of two renderers that
differ only in a fixed intensity offset and per-pixel texture, so the
same scene can be shown through a "sim" and a "real-like" camera.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

OUTCOMES = ("running", "grasped", "toppled", "timeout")
OBSERVATION_MODES = ("vector", "image_sim", "image_real_like")
REWARD_MODES = ("dense", "sparse")

HOME = (0.0, 0.0)
TARGET_INTENSITY = 0.85
HAND_INTENSITY = 0.55
BAR_INTENSITY = 0.7
REAL_OFFSET = 0.08
REAL_PATTERN_AMP = 0.05


@dataclass
class EnvConfig:
    grasp_threshold: float = 0.04
    topple_radius: float = 0.08
    max_steps: int = 50
    workspace: float = 1.0
    gain: float = 0.1
    reward_mode: str = "dense"
    observation_mode: str = "vector"
    image_size: int = 16
    render_seed: int = 0
    target_radius_min: float = 0.2
    target_radius_max: float = 0.8

    def validate(self) -> None:
        if not (0.0 < self.grasp_threshold < self.topple_radius < self.workspace):
            raise ValueError("need 0 < grasp_threshold < topple_radius < workspace")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.gain <= 0.0:
            raise ValueError("gain must be positive")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward_mode {self.reward_mode!r}")
        if self.observation_mode not in OBSERVATION_MODES:
            raise ValueError(f"unknown observation_mode {self.observation_mode!r}")
        if self.image_size < 4:
            raise ValueError("image_size must be >= 4")
        if not (self.grasp_threshold < self.target_radius_min
                < self.target_radius_max <= self.workspace):
            raise ValueError("target radii must lie between grasp_threshold "
                             "and workspace")

    @property
    def observation_dim(self) -> int:
        if self.observation_mode == "vector":
            return 5
        return self.image_size * self.image_size


@dataclass
class StepRecord:
    index: int
    action: np.ndarray
    reward: float
    outcome: str


@dataclass
class EpisodeLog:
    target: np.ndarray
    records: list = field(default_factory=list)


class GraspEnv:
    def __init__(self, config: EnvConfig) -> None:
        config.validate()
        self.config = config
        self.hand = np.array(HOME)
        self.target = np.zeros(2)
        self.aperture = 1.0
        self.step_count = 0
        self.outcome = "running"
        self._pattern = None

    # ------------------------------------------------------------- episodes

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        radius = rng.uniform(self.config.target_radius_min,
                             self.config.target_radius_max)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        return self.reset_to(radius * np.array([np.cos(angle), np.sin(angle)]))

    def reset_to(self, target: np.ndarray) -> np.ndarray:
        target = np.asarray(target, dtype=float)
        if target.shape != (2,):
            raise ValueError("target must be a 2-vector")
        w = self.config.workspace
        if np.any(np.abs(target) > w):
            raise ValueError("target outside workspace")
        if float(np.linalg.norm(target - np.array(HOME))) <= self.config.grasp_threshold:
            raise ValueError("target not graspable: too close to home")
        self.hand = np.array(HOME)
        self.target = target
        self.aperture = 1.0
        self.step_count = 0
        self.outcome = "running"
        return self.observe()

    def step(self, a: np.ndarray) -> tuple[np.ndarray, float, bool, str]:
        if self.outcome != "running":
            raise RuntimeError(f"step after episode ended ({self.outcome})")
        a = np.asarray(a, dtype=float)
        if a.shape != (3,):
            raise ValueError("action must be a 3-vector")
        if not np.all(np.isfinite(a)) or np.any(np.abs(a) > 1.0):
            raise ValueError("action components must lie in [-1, 1]")
        cfg = self.config
        self.hand = np.clip(self.hand + cfg.gain * a[:2],
                            -cfg.workspace, cfg.workspace)
        self.aperture = float(a[2])
        self.step_count += 1
        dist = float(np.linalg.norm(self.target - self.hand))
        closed = self.aperture < 0.0
        if closed and dist < cfg.grasp_threshold:
            self.outcome = "grasped"
            reward = 1.0
        elif closed and dist < cfg.topple_radius:
            self.outcome = "toppled"
            reward = -1.0
        else:
            reward = -dist if cfg.reward_mode == "dense" else 0.0
            if self.step_count >= cfg.max_steps:
                self.outcome = "timeout"
        done = self.outcome != "running"
        return self.observe(), reward, done, self.outcome

    # ------------------------------------------------------------ rendering

    def observe(self) -> np.ndarray:
        return self.render(self.config.observation_mode)

    def render(self, mode: str) -> np.ndarray:
        if mode not in OBSERVATION_MODES:
            raise ValueError(f"unknown render mode {mode!r}")
        if mode == "vector":
            w = self.config.workspace
            return np.array([
                (self.hand[0] + w) / (2.0 * w),
                (self.hand[1] + w) / (2.0 * w),
                (self.target[0] + w) / (2.0 * w),
                (self.target[1] + w) / (2.0 * w),
                (self.aperture + 1.0) / 2.0,
            ])
        img = self._render_sim()
        if mode == "image_real_like":
            img = np.clip(img + REAL_OFFSET + self._texture(), 0.0, 1.0)
        return img

    def _to_pixels(self, pos: np.ndarray) -> tuple[float, float]:
        """Map a workspace point to fractional (row, col) image coordinates."""
        n = self.config.image_size
        w = self.config.workspace
        col = (pos[0] + w) / (2.0 * w) * (n - 1)
        row = (w - pos[1]) / (2.0 * w) * (n - 1)
        return row, col

    def _render_sim(self) -> np.ndarray:
        n = self.config.image_size
        rows, cols = np.mgrid[0:n, 0:n].astype(float)
        img = np.zeros((n, n))
        for pos, intensity in ((self.target, TARGET_INTENSITY),
                               (self.hand, HAND_INTENSITY)):
            pr, pc = self._to_pixels(pos)
            img += intensity * np.exp(-((rows - pr) ** 2 + (cols - pc) ** 2) / 2.0)
        # the bottom row is a bar whose lit width encodes the aperture
        img[n - 1, :] = 0.0
        lit = int(round((self.aperture + 1.0) / 2.0 * n))
        img[n - 1, :lit] = BAR_INTENSITY
        return np.clip(img, 0.0, 1.0)

    def _texture(self) -> np.ndarray:
        if self._pattern is None:
            rng = np.random.default_rng(self.config.render_seed)
            n = self.config.image_size
            self._pattern = rng.uniform(-REAL_PATTERN_AMP, REAL_PATTERN_AMP, (n, n))
        return self._pattern


# ------------------------------------------------------------ episode logs

def dump_episode(log: EpisodeLog) -> str:
    lines = ["dualsys-episode 1",
             f"target {float(log.target[0])!r} {float(log.target[1])!r}",
             f"steps {len(log.records)}"]
    for rec in log.records:
        a = [float(v) for v in rec.action]
        lines.append(f"{rec.index} {a[0]!r} {a[1]!r} {a[2]!r} "
                     f"{float(rec.reward)!r} {rec.outcome}")
    return "\n".join(lines) + "\n"


def load_episode(text: str) -> EpisodeLog:
    lines = text.strip().split("\n")
    if lines[0] != "dualsys-episode 1":
        raise ValueError(f"bad episode header: {lines[0]!r}")
    t = lines[1].split()
    if t[0] != "target":
        raise ValueError("missing target line")
    log = EpisodeLog(target=np.array([float(t[1]), float(t[2])]))
    count = int(lines[2].split()[1])
    for line in lines[3:3 + count]:
        tok = line.split()
        if tok[5] not in OUTCOMES:
            raise ValueError(f"unknown outcome {tok[5]!r}")
        log.records.append(StepRecord(
            index=int(tok[0]),
            action=np.array([float(tok[1]), float(tok[2]), float(tok[3])]),
            reward=float(tok[4]),
            outcome=tok[5],
        ))
    return log


def replay_episode(config: EnvConfig, log: EpisodeLog) -> EpisodeLog:
    """Re-run the logged actions from the logged target; returns a fresh log."""
    env = GraspEnv(replace(config))
    env.reset_to(log.target)
    out = EpisodeLog(target=env.target.copy())
    for rec in log.records:
        _, reward, _, outcome = env.step(rec.action)
        out.records.append(StepRecord(rec.index, np.array(rec.action, dtype=float),
                                      reward, outcome))
    return out
