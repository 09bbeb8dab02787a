import itertools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template

import numpy as np

from npg_hpf.agents import NO_ACTION
from npg_hpf.autodiff import Graph
from npg_hpf.autodiff.checkpoint import load_checkpoint
from npg_hpf.envs import Environment, MatrixGame
from npg_hpf.fusion.losses import Learners
from npg_hpf.fusion.policy import VDPolicy
from npg_hpf.fusion.sampling import PolicySet
from npg_hpf.harness.metrics import read_metrics

"""Learned payoff tables and run reports."""

PAYOFF_FILE = "payoff.txt"
REPORT_FILE = "report.txt"
METRICS_FILE = "metrics.csv"
CHECKPOINT_DIR = "checkpoint"


@dataclass(frozen=True)
class PayoffTables:
    """Learned values of every joint action of the first step of a game,
    one table axis per agent."""

    q_tot: np.ndarray
    q_jt: np.ndarray

    @property
    def greedy_tot(self) -> tuple[int, ...]:
        return greedy_cell(self.q_tot)

    @property
    def greedy_jt(self) -> tuple[int, ...]:
        return greedy_cell(self.q_jt)


def greedy_cell(table: np.ndarray) -> tuple[int, ...]:
    """The cell of maximal value, lowest row-major index on ties."""
    return tuple(
        int(i) for i in np.unravel_index(np.argmax(table), table.shape)
    )


def joint_value_table(
    policy: VDPolicy, env: Environment, restricted: bool
) -> np.ndarray:
    """Evaluate a head of a policy on every joint action at the start of an
    episode."""
    observations, state = env.reset(seed=0)
    n_agents, n_actions = env.spec.n_agents, env.spec.n_actions
    q, _ = policy.utilities(
        observations,
        np.full(n_agents, NO_ACTION, dtype=np.int64),
        policy.initial_hidden(),
    )

    actions = np.array(list(itertools.product(range(n_actions), repeat=n_agents)))
    n = len(actions)
    head = policy.online.restricted if restricted else policy.online.joint
    values = head.evaluate(
        Graph(record=False),
        np.broadcast_to(q, (n,) + q.shape),
        actions,
        np.broadcast_to(state, (n,) + state.shape),
    )
    return values.data.reshape((n_actions,) * n_agents)


def emit_payoff_table(learners: Learners, env: Environment) -> PayoffTables:
    """The learned restricted (Q_tot) and joint (Q_jt) tables of the matrix
    game. For a fused pair Q_tot is the beta learner's and Q_jt the alpha
    learner's.

    Raises:
        ValueError: If env is not the matrix game.
    """
    if not isinstance(env, MatrixGame):
        raise ValueError(
            f"Payoff tables are defined for the matrix game only, "
            f"not {type(env).__name__}"
        )

    if isinstance(learners, PolicySet):
        tot_policy, jt_policy = learners.beta, learners.alpha
    else:
        tot_policy = jt_policy = learners

    return PayoffTables(
        q_tot=joint_value_table(tot_policy, env, restricted=True),
        q_jt=joint_value_table(jt_policy, env, restricted=False),
    )


def format_payoff_table(table: np.ndarray, title: str) -> str:
    """Render a two-agent table; the greedy cell is marked with '*'."""
    if table.ndim != 2:
        raise ValueError(f"Only two-agent tables can be rendered: {table.shape}")

    greedy = greedy_cell(table)
    header = "".join(f"{f'u{j + 1}':>11}" for j in range(table.shape[1]))
    lines = [title, f"{'':>4}{header}"]
    for i, row in enumerate(table):
        cells = "".join(
            f"{value:>10.2f}{'*' if (i, j) == greedy else ' '}"
            for j, value in enumerate(row)
        )
        lines.append(f"{f'u{i + 1}':>4}{cells}")
    return "\n".join(lines)


def format_payoff_tables(tables: PayoffTables) -> str:
    return "\n\n".join(
        [
            format_payoff_table(tables.q_tot, "Q_tot"),
            format_payoff_table(tables.q_jt, "Q_jt"),
        ]
    )


def summarise_curve(rows: list[dict[str, str]]) -> str:
    """One line per evaluation point: step, median test return and, for
    fused runs, selection frequencies."""
    lines = [f"{'step':>10} {'median':>12} {'alpha':>9} {'beta':>9}"]
    for row in rows:
        lines.append(
            f"{row['step']:>10} {row['test_return_median']:>12} "
            f"{row['select_alpha'] or '-':>9} {row['select_beta'] or '-':>9}"
        )
    return "\n".join(lines)


def render_report(run_dir: Path | str) -> str:
    """Render the report of a finished run from its directory and write it to
    report.txt there."""
    run_dir = Path(run_dir)
    rows = read_metrics(run_dir / METRICS_FILE)
    if not rows:
        raise ValueError(f"No evaluation rows in {run_dir / METRICS_FILE}")

    _, metadata = load_checkpoint(run_dir / CHECKPOINT_DIR)
    config = metadata["config"]

    payoff_path = run_dir / PAYOFF_FILE
    payoff = (
        payoff_path.read_text(encoding="utf-8")
        if payoff_path.is_file()
        else "No payoff tables (not a matrix game run)."
    )

    final = rows[-1]
    source = resources.files("npg_hpf.data.resources").joinpath(
        "report_template.txt"
    )
    with resources.as_file(source) as template:
        with open(template) as f:
            t = Template(f.read())
            report = t.substitute(
                {
                    "run_dir": run_dir.as_posix(),
                    "algo": config["algo"],
                    "env": config["env"],
                    "seed": config["seed"],
                    "steps": final["step"],
                    "episodes": final["episode"],
                    "median": final["test_return_median"],
                    "q25": final["test_return_q25"],
                    "q75": final["test_return_q75"],
                    "curve": summarise_curve(rows),
                    "payoff": payoff.rstrip("\n"),
                }
            )

    (run_dir / REPORT_FILE).write_text(report, encoding="utf-8")
    return report
