import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def setup_logging(config=None, console_level=None):
    """
    Set up logging with rotation into the configured log directory.

    Parameters:
    -----------
    config : dict, optional
        The `logging` section of the configuration.
    console_level : int, optional
        Level for the console handler (--verbose / --quiet); defaults to the file level.
    """
    config = config or {}
    log_dir = Path(config.get('directory', 'logs'))
    log_dir.mkdir(parents=True, exist_ok=True)
    level = getattr(logging, str(config.get('level', 'INFO')).upper(), logging.INFO)

    formatter = logging.Formatter(LOG_FORMAT)

    # 5MB per file, keep 5 backup files
    file_handler = RotatingFileHandler(
        log_dir / config.get('file', 'equidesign.log'),
        maxBytes=int(config.get('max_bytes', 5 * 1024 * 1024)),
        backupCount=int(config.get('backup_count', 5)),
        encoding='utf-8'
    )
    file_handler.setFormatter(formatter)
    file_handler.setLevel(min(level, console_level or level))

    # stdout carries the verdict document, so the console handler writes to stderr
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.setLevel(console_level or level)

    root = logging.getLogger()
    root.setLevel(min(level, console_level or level))

    for handler in root.handlers[:]:
        root.removeHandler(handler)

    root.addHandler(file_handler)
    root.addHandler(console_handler)

    logging.debug("Logging initialized with rotation")
