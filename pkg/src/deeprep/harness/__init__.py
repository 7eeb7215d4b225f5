from .config import ConfigError, ExperimentConfig, expand_grid, load_config, parse_config
from .report import emit_loss_curves, format_report, read_report, report_csv, write_report
from .runner import (ORIGINAL, Cell, ExperimentReport, LeakageAudit, LeakageError, RunError, load_dataset,
                     run_experiment)
