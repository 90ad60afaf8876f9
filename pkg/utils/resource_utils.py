import os
import sys
import logging

logger = logging.getLogger(__name__)

def resource_path(relative_path, external=False):
    """
    Get absolute path to a bundled resource such as a fixture under data/.

    Args:
        relative_path (str): The path relative to the repository root
        external (bool): Resolve next to the executable (frozen) or the entry script
            instead of the bundle; used for deployment-time files like config.yaml

    Returns:
        str: The absolute path to the resource. Missing files are logged and the path
        is returned anyway so the caller can report the error with context.
    """
    if os.path.isabs(relative_path):
        return relative_path
    if external and getattr(sys, 'frozen', False):
        base_path = os.path.dirname(sys.executable)
    elif not external and hasattr(sys, '_MEIPASS'):
        base_path = sys._MEIPASS
    else:
        base_path = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

    full_path = os.path.join(base_path, relative_path)
    if not os.path.exists(full_path):
        logger.warning(f"Resource not found: {full_path}")
    return full_path


def data_path(name):
    """Path of a fixture file shipped in data/."""
    return resource_path(os.path.join('data', name))
