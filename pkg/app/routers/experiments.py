"""
Experiment commands.
"""
import logging

from app.backtrans import run_tag_steering_experiment
from app.pipeline import run_experiment
from app.routers import CommandRouter
from app.schemas.backtrans import SteeringConfig
from app.schemas.pipeline import PipelineConfig

logger = logging.getLogger(__name__)

router = CommandRouter(tags=["experiments"])


@router.command("experiment", PipelineConfig)
def experiment(config: PipelineConfig):
    """Five-system comparison of mixing strategies on the noisy test set."""
    table = run_experiment(config)
    print(table.to_text(), end="")
    return sum(row.errors for row in table.rows)


@router.command("steer", SteeringConfig)
def steer(config: SteeringConfig):
    """Check that target tags steer a back-translation generator's output style."""
    report = run_tag_steering_experiment(config)
    print(report.to_text(), end="")
