"""
Logger setup for the cluster-entropy pipeline.

All diagnostics go to stderr so stdout and output files stay clean:

    from services.logger import logger
"""

import logging
import sys

from config import config

LOGGER_NAME = "wsi_entropy"


def setup_logger(level: str | int = config.LOG_LEVEL) -> logging.Logger:
    """
    Configure and return the main application logger.

    The logger is configured with:
      - level: taken from CE_LOG_LEVEL unless given
      - format: "<timestamp> - <level> - <message>"
      - stream: stderr
    """
    logging.basicConfig(
        level=logging.WARNING,
        format="%(asctime)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    app_logger = logging.getLogger(LOGGER_NAME)
    app_logger.setLevel(level)
    return app_logger


logger: logging.Logger = setup_logger()
