import logging
import os

_ROOT = "balens"
_configured = False


def get_logger(name: str) -> logging.Logger:
    """Return a logger under the balens root, configuring the root once"""
    global _configured
    root = logging.getLogger(_ROOT)
    if not _configured:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
        root.setLevel(os.getenv("BALENS_LOG_LEVEL", "INFO").upper())
        _configured = True

    short = name.split(".", 1)[-1] if name.startswith("src.") else name
    return root.getChild(short)


def set_level(level: str) -> None:
    """Override the level picked up from the environment (CLI --log-level)"""
    get_logger(__name__)
    logging.getLogger(_ROOT).setLevel(level.upper())
