from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np
from structlog import get_logger

from npg_hpf.envs.base import (
    EnvSpec,
    Environment,
    EpisodeOverError,
    StepResult,
)

log = get_logger(__package__)


class Action(IntEnum):
    """Predator actions."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4
    CATCH = 5


MOVES = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}
NEIGHBOURS = tuple(MOVES.values())

EMPTY, PREDATOR, PREY = 0, 1, 2

"Observation channels, in flattening order."
CHANNELS = ("predator", "prey", "out_of_bounds")


@dataclass(frozen=True)
class PredatorPreyConfig:
    n_predators: int = 8
    n_prey: int = 8
    grid_size: int = 10
    episode_limit: int = 200
    sight: int = 5
    capture_reward: float = 10.0
    miscapture_penalty: float = -2.0

    def __post_init__(self):
        if self.sight < 1 or self.sight % 2 == 0:
            raise ValueError(f"sight must be a positive odd number: {self.sight}")
        if self.n_predators + self.n_prey > self.grid_size**2:
            raise ValueError(
                f"{self.n_predators + self.n_prey} entities do not fit on a "
                f"{self.grid_size}x{self.grid_size} grid"
            )


PRESETS = {
    "pp": PredatorPreyConfig(),
    "pp-small": PredatorPreyConfig(n_predators=4, n_prey=4, grid_size=7),
}


@dataclass
class PredatorPreyState:
    """Entity positions as (row, column) pairs. Row 0 is the top (north)
    edge. Captured prey keep their last position but are not on the grid."""

    predators: np.ndarray
    prey: np.ndarray
    alive: np.ndarray
    t: int = 0


class PredatorPrey(Environment):
    """A grid world in which predators must catch prey in pairs.

    A step is resolved in this order:

    1. Predators move in agent-id order. A move into a wall or an occupied
       cell becomes a stay.
    2. Each alive prey, in prey order, with at least two adjacent
       (4-neighbourhood) predators executing catch that have not already
       caught this step is captured by the two lowest-id such predators and
       removed. Each capture is rewarded.
    3. A catching predator that caught nothing is penalised once if it is the
       only catcher adjacent to some prey.
    4. Surviving prey move, in prey order, to a uniformly chosen free
       adjacent cell, or stay if there is none.

    The episode terminates when all prey are captured and is truncated at the
    episode limit.
    """

    def __init__(self, config: PredatorPreyConfig = PredatorPreyConfig()):
        self.config = config
        n_pred, n_prey = config.n_predators, config.n_prey
        self.spec = EnvSpec(
            n_agents=n_pred,
            n_actions=len(Action),
            obs_width=len(CHANNELS) * config.sight**2,
            state_width=2 * (n_pred + n_prey) + n_prey,
            episode_limit=config.episode_limit,
        )
        self._rng = np.random.default_rng()
        self._grid = np.zeros((config.grid_size, config.grid_size), np.int8)
        self.current: PredatorPreyState | None = None

    @property
    def done(self) -> bool:
        s = self.current
        return not s.alive.any() or s.t >= self.config.episode_limit

    def reset(self, seed: int = None) -> tuple[np.ndarray, np.ndarray]:
        """Place all predators and prey on distinct, uniformly chosen cells."""
        self._rng = np.random.default_rng(seed)
        size = self.config.grid_size
        n_pred = self.config.n_predators
        cells = self._rng.choice(
            size * size, size=n_pred + self.config.n_prey, replace=False
        )
        positions = np.stack([cells // size, cells % size], axis=1)
        self.place(positions[:n_pred], positions[n_pred:])

        return self.observations(), self.state()

    def place(self, predators: np.ndarray, prey: np.ndarray):
        """Start an episode from the given positions."""
        predators = np.asarray(predators, dtype=np.int64).reshape(-1, 2)
        prey = np.asarray(prey, dtype=np.int64).reshape(-1, 2)
        if len(predators) != self.config.n_predators:
            raise ValueError(
                f"Expected {self.config.n_predators} predators, "
                f"got {len(predators)}"
            )
        if len(prey) > self.config.n_prey:
            raise ValueError(
                f"Expected at most {self.config.n_prey} prey, got {len(prey)}"
            )

        alive = np.zeros(self.config.n_prey, dtype=bool)
        alive[: len(prey)] = True
        all_prey = np.zeros((self.config.n_prey, 2), dtype=np.int64)
        all_prey[: len(prey)] = prey

        self._grid[:] = EMPTY
        for kind, cells in ((PREDATOR, predators), (PREY, prey)):
            for r, c in cells:
                if not self._in_bounds(r, c):
                    raise ValueError(f"Position ({r}, {c}) is off the grid")
                if self._grid[r, c] != EMPTY:
                    raise ValueError(f"Position ({r}, {c}) is occupied twice")
                self._grid[r, c] = kind

        self.current = PredatorPreyState(predators.copy(), all_prey, alive)

    def step(self, actions: Sequence[int]) -> StepResult:
        if self.current is None or self.done:
            raise EpisodeOverError("The episode is over, reset first")
        actions = self.check_actions(actions)
        s = self.current

        for i, a in enumerate(actions):
            if a in MOVES:
                self._move_predator(i, MOVES[a])

        reward = self._resolve_catches(actions)

        for j in np.flatnonzero(s.alive):
            free = self._free_neighbours(*s.prey[j])
            if free:
                r, c = free[self._rng.integers(len(free))]
                self._grid[tuple(s.prey[j])] = EMPTY
                self._grid[r, c] = PREY
                s.prey[j] = (r, c)

        s.t += 1
        terminated = not s.alive.any()
        truncated = not terminated and s.t >= self.config.episode_limit

        return StepResult(
            reward=reward,
            terminated=terminated,
            truncated_by_limit=truncated,
            next_observations=self.observations(),
            next_state=self.state(),
        )

    def _resolve_catches(self, actions: np.ndarray) -> float:
        s = self.current
        catching = [i for i, a in enumerate(actions) if a == Action.CATCH]
        catchers = {
            j: [i for i in catching if _adjacent(s.predators[i], s.prey[j])]
            for j in np.flatnonzero(s.alive)
        }

        reward = 0.0
        used = set()
        for j, adjacent in catchers.items():
            available = [i for i in adjacent if i not in used]
            if len(available) >= 2:
                used.update(available[:2])
                s.alive[j] = False
                self._grid[tuple(s.prey[j])] = EMPTY
                reward += self.config.capture_reward
                log.debug(
                    "Prey captured", prey=int(j), catchers=available[:2], t=s.t
                )

        for i in catching:
            if any(adjacent == [i] for adjacent in catchers.values()):
                reward += self.config.miscapture_penalty

        return reward

    def _move_predator(self, i: int, delta: tuple[int, int]):
        r, c = self.current.predators[i]
        nr, nc = r + delta[0], c + delta[1]
        if self._in_bounds(nr, nc) and self._grid[nr, nc] == EMPTY:
            self._grid[r, c] = EMPTY
            self._grid[nr, nc] = PREDATOR
            self.current.predators[i] = (nr, nc)

    def _free_neighbours(self, r: int, c: int) -> list[tuple[int, int]]:
        return [
            (r + dr, c + dc)
            for dr, dc in NEIGHBOURS
            if self._in_bounds(r + dr, c + dc)
            and self._grid[r + dr, c + dc] == EMPTY
        ]

    def _in_bounds(self, r: int, c: int) -> bool:
        size = self.config.grid_size
        return 0 <= r < size and 0 <= c < size

    def observe(self, agent_id: int) -> np.ndarray:
        """The sight x sight window centred on a predator, with predator, prey
        and out-of-bounds channels, flattened channel-major."""
        if not 0 <= agent_id < self.config.n_predators:
            raise ValueError(f"Invalid agent id: {agent_id}")

        k = self.config.sight
        radius = k // 2
        size = self.config.grid_size
        window = np.zeros((len(CHANNELS), k, k), dtype=np.float32)

        # Pad the grid with an out-of-bounds marker and slice the window.
        padded = np.full((size + 2 * radius, size + 2 * radius), -1, np.int8)
        padded[radius:-radius, radius:-radius] = self._grid
        r, c = self.current.predators[agent_id]
        view = padded[r : r + k, c : c + k]

        window[0] = view == PREDATOR
        window[1] = view == PREY
        window[2] = view == -1
        return window.reshape(-1)

    def observations(self) -> np.ndarray:
        return np.stack(
            [self.observe(i) for i in range(self.config.n_predators)]
        )

    def state(self) -> np.ndarray:
        """Entity coordinates normalised to [0, 1] (captured prey at 0),
        followed by prey alive flags."""
        s = self.current
        scale = max(self.config.grid_size - 1, 1)
        prey = np.where(s.alive[:, None], s.prey, 0)
        return np.concatenate(
            [
                (s.predators / scale).reshape(-1),
                (prey / scale).reshape(-1),
                s.alive.astype(np.float64),
            ]
        ).astype(np.float32)

    def render(self) -> str:
        """An ASCII picture of the grid: 'P' predator, 'o' prey."""
        symbols = {EMPTY: ".", PREDATOR: "P", PREY: "o"}
        return "\n".join(
            "".join(symbols[int(v)] for v in row) for row in self._grid
        )


def _adjacent(a: np.ndarray, b: np.ndarray) -> bool:
    return abs(int(a[0]) - int(b[0])) + abs(int(a[1]) - int(b[1])) == 1


def make_predator_prey(name: str = "pp") -> PredatorPrey:
    if name not in PRESETS:
        raise ValueError(f"Unknown predator-prey preset: {name}")
    return PredatorPrey(PRESETS[name])
