from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from structlog import get_logger

from npg_hpf.agents import EpsilonSchedule
from npg_hpf.autodiff import Graph
from npg_hpf.autodiff.checkpoint import load_checkpoint, save_checkpoint
from npg_hpf.config import RunConfig
from npg_hpf.envs import EnvSpec, MatrixGame, make_env
from npg_hpf.fusion.losses import Learners, LossOptions, policies_of, total_loss
from npg_hpf.fusion.policy import LearnerKind, VDPolicy
from npg_hpf.fusion.sampling import PolicySet, SelectionRecord
from npg_hpf.harness.metrics import MetricsRow, write_metrics
from npg_hpf.harness.report import (
    CHECKPOINT_DIR,
    METRICS_FILE,
    PAYOFF_FILE,
    PayoffTables,
    emit_payoff_table,
    format_payoff_tables,
)
from npg_hpf.harness.runner import evaluate, make_controller, run_episode
from npg_hpf.replay import EpisodeBatch, ReplayBuffer

log = get_logger(__package__)

"""The training loop.

Each iteration plays one episode with the training controller, stores it,
and, once the replay buffer holds a full batch, takes one gradient step of
every learner on a sampled batch. Target networks are synchronised every
`target_update_episodes` episodes. Whenever the environment step count
crosses a multiple of `eval_interval_steps`, and once more when training
ends, the test policy is evaluated and a metrics row is appended.

A run draws all of its randomness from three generators spawned from the
configured seed: one for initial parameters, one for training rollouts and
replay sampling and one for evaluation. Given a configuration the metrics
log is therefore fully determined.
"""

"Fused algorithms and the kinds of their (alpha, beta) learners."
FUSED_KINDS = {
    "hpf-wq": (LearnerKind.WQMIX, LearnerKind.QMIX),
    "hpf-qv": (LearnerKind.QPLEX, LearnerKind.VDN),
}


def build_learners(
    config: RunConfig, spec: EnvSpec, rng: np.random.Generator
) -> Learners:
    """Create the learner of a baseline run or the fused pair of an hpf-* run.

    Args:
        config: A resolved configuration.
        spec: The environment dimensions.
        rng: Source of initial parameter values.
    """
    options = {
        "optimizer": config.optimizer,
        "lr": config.lr,
        "rmsprop_alpha": config.rmsprop_alpha,
        "optim_eps": config.optim_eps,
        "grad_norm_clip": config.grad_norm_clip,
        "hidden_width": config.hidden_width,
        "mixing_embed": config.mixing_embed,
        "central_hidden": config.central_hidden,
    }
    if not config.is_fused:
        return VDPolicy(config.algo, spec, rng, name="policy", **options)

    alpha_kind, beta_kind = FUSED_KINDS[config.algo]
    return PolicySet(
        alpha=VDPolicy(alpha_kind, spec, rng, name="alpha", **options),
        beta=VDPolicy(beta_kind, spec, rng, name="beta", **options),
        estimator=config.estimator,
        sampler=config.sampler,
        temperature=config.temperature,
    )


def loss_options(config: RunConfig) -> LossOptions:
    return LossOptions(
        gamma=config.gamma,
        wqmix_alpha=config.wqmix_alpha,
        wqmix_weighted=config.wqmix_weighted,
        instructive=config.instructive,
        instructive_both_sides=config.instructive_both_sides,
    )


def train_step(
    learners: Learners, batch: EpisodeBatch, options: LossOptions
) -> dict[str, float | None]:
    """Take one gradient step of every learner on the joint objective.

    Returns:
        The loss terms before the step, keyed by metrics column.
    """
    graph = Graph()
    breakdown = total_loss(graph, batch, learners, options)
    graph.backward(breakdown.total)
    for policy in policies_of(learners):
        policy.step_optimizer()
    return breakdown.values()


def checkpoint_parameters(learners: Learners) -> dict[str, np.ndarray]:
    parameters = {}
    for policy in policies_of(learners):
        parameters.update(policy.state_dict())
    return parameters


@dataclass
class RunArtifacts:
    """The products of a training run."""

    config: RunConfig
    learners: Learners
    rows: list[MetricsRow] = field(default_factory=list)
    run_dir: Path | None = None
    """The directory the artifacts were written to, if any."""
    payoff: PayoffTables | None = None
    """The learned tables, for matrix game runs."""

    @property
    def final(self) -> MetricsRow:
        return self.rows[-1]


@dataclass
class IntervalTotals:
    """Training statistics accumulated between two evaluation points."""

    returns: list[float] = field(default_factory=list)
    losses: list[dict] = field(default_factory=list)

    def train_return(self) -> float | None:
        return float(np.mean(self.returns)) if self.returns else None

    def mean_losses(self) -> dict[str, float | None]:
        means = {}
        for key in (
            "loss_total",
            "loss_td_tot",
            "loss_td_jt",
            "loss_instructive",
        ):
            values = [x[key] for x in self.losses if x[key] is not None]
            means[key] = float(np.mean(values)) if values else None
        return means

    def clear(self):
        self.returns.clear()
        self.losses.clear()


def run_training(config: RunConfig, out_dir: Path | str = None) -> RunArtifacts:
    """Train a baseline learner or a fused pair.

    Args:
        config: The run configuration. None defaults are resolved here.
        out_dir: If given, the metrics log, the final checkpoint and (for the
            matrix game) the learned payoff tables are written there.

    Returns:
        The run artifacts.
    """
    config = config.resolve()

    env = make_env(config.env)
    eval_env = make_env(config.env)
    init_rng, train_rng, eval_rng = (
        np.random.default_rng(s)
        for s in np.random.SeedSequence(config.seed).spawn(3)
    )

    learners = build_learners(config, env.spec, init_rng)
    options = loss_options(config)
    buffer = ReplayBuffer(capacity=config.buffer_size)
    schedule = EpsilonSchedule(
        start=config.epsilon_start,
        end=config.epsilon_end,
        anneal_steps=config.epsilon_anneal_steps,
        mode=config.epsilon_mode,
    )

    selection = SelectionRecord(2) if config.is_fused else None
    train_controller = make_controller(learners, "composite", selection)
    eval_controller = make_controller(learners, config.test_policy)

    log.info(
        "Training started",
        algo=config.algo,
        env=config.env,
        seed=config.seed,
        max_steps=config.max_steps,
        learners=[str(p) for p in policies_of(learners)],
    )

    rows = []
    totals = IntervalTotals()
    t_env = episode = 0
    next_eval = config.eval_interval_steps

    while t_env < config.max_steps:
        record = run_episode(
            env, train_controller, schedule.epsilon_at(t_env), train_rng
        )
        buffer.push_episode(record)
        t_env += record.length
        episode += 1
        totals.returns.append(record.episode_return)

        if buffer.can_sample(config.batch_size):
            batch = buffer.sample_batch(config.batch_size, train_rng)
            losses = train_step(learners, batch, options)
            totals.losses.append(losses)
            log.debug("Trained", episode=episode, **losses)

        if episode % config.target_update_episodes == 0:
            for policy in policies_of(learners):
                policy.sync_targets()

        if t_env >= next_eval or t_env >= config.max_steps:
            stats = evaluate(
                eval_controller,
                eval_env,
                config.eval_episodes,
                eval_rng,
                epsilon=config.eval_epsilon,
            )
            selected = {}
            if selection is not None and selection.total > 0:
                alpha = round(float(selection.frequencies()[0]), 6)
                selected = {
                    "select_alpha": alpha,
                    "select_beta": round(1.0 - alpha, 6),
                }
                selection.reset()

            row = MetricsRow(
                step=t_env,
                episode=episode,
                train_return=totals.train_return(),
                test_return_median=stats.median,
                test_return_q25=stats.q25,
                test_return_q75=stats.q75,
                epsilon=schedule.epsilon_at(t_env),
                **selected,
                **totals.mean_losses(),
            )
            rows.append(row)
            totals.clear()
            log.info(
                "Evaluation",
                step=row.step,
                episode=row.episode,
                test_return_median=row.test_return_median,
                epsilon=row.epsilon,
                select_alpha=row.select_alpha,
                loss_total=row.loss_total,
            )
            while next_eval <= t_env:
                next_eval += config.eval_interval_steps

    artifacts = RunArtifacts(config=config, learners=learners, rows=rows)
    if isinstance(env, MatrixGame):
        artifacts.payoff = emit_payoff_table(learners, env)
        log.info(
            "Learned payoff tables",
            greedy_tot=artifacts.payoff.greedy_tot,
            greedy_jt=artifacts.payoff.greedy_jt,
        )

    if out_dir is not None:
        write_run(artifacts, Path(out_dir), episode)

    return artifacts


def write_run(artifacts: RunArtifacts, run_dir: Path, episode: int):
    """Write the metrics log, the checkpoint and any payoff tables of a run."""
    run_dir.mkdir(parents=True, exist_ok=True)
    write_metrics(run_dir / METRICS_FILE, artifacts.rows)
    save_checkpoint(
        run_dir / CHECKPOINT_DIR,
        checkpoint_parameters(artifacts.learners),
        metadata={
            "config": artifacts.config.to_serializable(),
            "step": artifacts.final.step if artifacts.rows else 0,
            "episode": episode,
        },
    )
    if artifacts.payoff is not None:
        (run_dir / PAYOFF_FILE).write_text(
            format_payoff_tables(artifacts.payoff) + "\n", encoding="utf-8"
        )
    artifacts.run_dir = run_dir
    log.info("Run written", run_dir=str(run_dir))


def load_run(checkpoint_dir: Path | str) -> tuple[RunConfig, Learners]:
    """Rebuild the configuration and the trained learners of a run from its
    checkpoint directory."""
    parameters, metadata = load_checkpoint(checkpoint_dir)
    if "config" not in metadata:
        raise ValueError(f"Checkpoint {checkpoint_dir} has no run configuration")

    config = RunConfig.from_serializable(metadata["config"]).resolve()
    env = make_env(config.env)
    learners = build_learners(
        config, env.spec, np.random.default_rng(config.seed)
    )
    for policy in policies_of(learners):
        policy.load_state_dict(parameters)
    return config, learners
