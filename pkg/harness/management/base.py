"""
Shared plumbing of the lab's management commands.

Every command takes ``--config``, ``--seed``, ``--threads`` and ``--out``
and maps lab errors onto exit codes: 2 for a config error, 3 for a numeric
floor error and 1 for any other lab failure.
"""

import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from harness.config import load_config
from manifold_lab.exceptions import ConfigError, LabError, NumericFloorError

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NUMERIC_FLOOR = 3


class LabCommand(BaseCommand):
    """Base command: loads the experiment config and translates errors."""

    def add_arguments(self, parser):
        parser.add_argument("--config", help="Experiment config file")
        parser.add_argument("--seed", type=int, help="Override experiment.seed")
        parser.add_argument("--threads", type=int, help="Override experiment.threads")
        parser.add_argument("--out", help="Override output.dir")
        self.add_lab_arguments(parser)

    def add_lab_arguments(self, parser):
        """Command-specific arguments."""

    def load(self, options):
        overrides = {
            "experiment.seed": options.get("seed"),
            "experiment.threads": options.get("threads"),
            "output.dir": options.get("out"),
        }
        return load_config(options.get("config"), overrides)

    def handle(self, *args, **options):
        try:
            config = self.load(options)
            self.run(config, options)
        except ConfigError as error:
            detail = f" {error.errors}" if error.errors else ""
            raise CommandError(f"{error}{detail}", returncode=EXIT_CONFIG)
        except NumericFloorError as error:
            raise CommandError(str(error), returncode=EXIT_NUMERIC_FLOOR)
        except LabError as error:
            logger.error("%s failed: %s", self.__module__.rsplit(".", 1)[-1], error)
            raise CommandError(str(error), returncode=1)

    def run(self, config, options):
        raise NotImplementedError

    def out_dir(self, config):
        return Path(config.output_dir)

    def report(self, paths):
        for path in paths:
            self.stdout.write(self.style.SUCCESS(f"wrote {path}"))
