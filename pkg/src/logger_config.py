# src/logger_config.py
import logging
from pythonjsonlogger import jsonlogger

from src.config import settings


def setup_logger():
    """Configure logging for the simulator"""

    logger = logging.getLogger("cmvno_sim")
    logger.setLevel(settings.log_level.upper())

    console_handler = logging.StreamHandler()
    console_handler.setLevel(settings.log_level.upper())

    json_formatter = jsonlogger.JsonFormatter(
        fmt='%(asctime)s %(name)s %(levelname)s %(message)s'
    )
    console_handler.setFormatter(json_formatter)

    if not logger.handlers:
        logger.addHandler(console_handler)

    return logger


logger = setup_logger()
