from npg_hpf.harness.metrics import MetricsRow, read_metrics, write_metrics
from npg_hpf.harness.report import emit_payoff_table, render_report
from npg_hpf.harness.runner import ReturnStats, evaluate, run_episode
from npg_hpf.harness.training import RunArtifacts, load_run, run_training

__all__ = [
    "MetricsRow",
    "ReturnStats",
    "RunArtifacts",
    "emit_payoff_table",
    "evaluate",
    "load_run",
    "read_metrics",
    "render_report",
    "run_episode",
    "run_training",
    "write_metrics",
]
