from dataclasses import dataclass

import numpy as np

"""An executable check that a mixture of a residual-corrected monotonic value
and a second monotonic value still satisfies Individual-Global-Max.

For a small game with per-agent utilities Q_i and greedy tuple u_bar, given

    Q_tot1, Q_tot2   tables non-decreasing in every agent's utility
    Q_r <= 0         a residual table
    w_r              0 at u_bar, 1 elsewhere
    0 <= lam <= 1

the joint value

    Q_jt = lam (Q_tot1 + w_r Q_r) + (1 - lam) Q_tot2

is maximised at u_bar. `igm_oracle_check` verifies this by enumerating
every joint action.
"""

"Tolerance for monotonicity and maximum comparisons."
TOLERANCE = 1e-9


class OracleInstanceError(ValueError):
    """An exception raised when an oracle instance violates its
    preconditions."""

    pass


@dataclass
class IgmOracleInstance:
    """A small joint game. Tables have one axis per agent."""

    utilities: np.ndarray  # (n_agents, n_actions)
    q_tot_1: np.ndarray
    q_tot_2: np.ndarray
    q_r: np.ndarray
    w_r: np.ndarray
    lam: float

    def __post_init__(self):
        self.utilities = np.asarray(self.utilities, dtype=np.float64)
        for name in ("q_tot_1", "q_tot_2", "q_r", "w_r"):
            setattr(
                self, name, np.asarray(getattr(self, name), dtype=np.float64)
            )
        self.lam = float(self.lam)

    @property
    def greedy(self) -> tuple[int, ...]:
        """The tuple of per-agent argmaxes, lowest index on ties."""
        return tuple(int(i) for i in np.argmax(self.utilities, axis=-1))

    def validate(self):
        """Raises OracleInstanceError if any precondition does not hold."""
        if self.utilities.ndim != 2:
            raise OracleInstanceError(
                f"Utilities must be (agents, actions): {self.utilities.shape}"
            )
        n_agents, n_actions = self.utilities.shape
        shape = (n_actions,) * n_agents
        for name in ("q_tot_1", "q_tot_2", "q_r", "w_r"):
            table = getattr(self, name)
            if table.shape != shape:
                raise OracleInstanceError(
                    f"{name} has shape {table.shape}, expected {shape}"
                )

        if not 0 <= self.lam <= 1:
            raise OracleInstanceError(f"lam must be in [0, 1]: {self.lam}")
        if np.any(self.q_r > 0):
            raise OracleInstanceError("The residual table must be <= 0")

        mask = np.ones(shape)
        mask[self.greedy] = 0
        if not np.array_equal(self.w_r, mask):
            raise OracleInstanceError(
                "w_r must be 0 at the greedy joint action and 1 elsewhere"
            )

        for name in ("q_tot_1", "q_tot_2"):
            if not is_monotonic(getattr(self, name), self.utilities):
                raise OracleInstanceError(
                    f"{name} is not monotonic in the agent utilities"
                )

    def joint_values(self) -> np.ndarray:
        return self.lam * (self.q_tot_1 + self.w_r * self.q_r) + (
            1 - self.lam
        ) * self.q_tot_2

    @classmethod
    def from_serializable(cls, serializable: dict):
        return cls(**serializable)


def is_monotonic(table: np.ndarray, utilities: np.ndarray) -> bool:
    """True if the table is non-decreasing in each agent's utility, all other
    agents' actions held fixed."""
    for axis, q in enumerate(utilities):
        ordered = np.take(table, np.argsort(q, kind="stable"), axis=axis)
        if np.any(np.diff(ordered, axis=axis) < -TOLERANCE):
            return False
    return True


def igm_oracle_check(instance: IgmOracleInstance) -> bool:
    """True if the greedy joint action maximises the mixed joint value over
    all joint actions.

    Raises:
        OracleInstanceError: If the instance is invalid.
    """
    instance.validate()
    q_jt = instance.joint_values()
    return bool(q_jt[instance.greedy] >= q_jt.max() - TOLERANCE)


def random_oracle_instance(
    rng: np.random.Generator, n_agents: int, n_actions: int
) -> IgmOracleInstance:
    """Draw a valid instance.

    The two monotonic tables are a positively weighted sum of utilities plus
    a constant, and a positively weighted sum of utilities and their cubes.
    """
    if n_agents < 1 or n_actions < 1:
        raise ValueError(
            f"Invalid game size: {n_agents} agents, {n_actions} actions"
        )

    utilities = rng.normal(size=(n_agents, n_actions))
    grids = np.meshgrid(*utilities, indexing="ij")

    a = np.abs(rng.normal(size=n_agents))
    q_tot_1 = sum(w * g for w, g in zip(a, grids)) + rng.normal()

    b = np.abs(rng.normal(size=n_agents))
    c = np.abs(rng.normal(size=n_agents))
    q_tot_2 = sum(w * g + v * g**3 for w, v, g in zip(b, c, grids))

    shape = (n_actions,) * n_agents
    q_r = -np.abs(rng.normal(scale=5.0, size=shape))
    w_r = np.ones(shape)
    w_r[tuple(np.argmax(utilities, axis=-1))] = 0

    return IgmOracleInstance(
        utilities=utilities,
        q_tot_1=q_tot_1,
        q_tot_2=q_tot_2,
        q_r=q_r,
        w_r=w_r,
        lam=rng.uniform(),
    )
