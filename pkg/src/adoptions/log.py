"""Console logging for adoptions.

Wraps the stdlib `logging` module with level-colored console output. Each level
gets a `bcolors` color, and `-v` switches on DEBUG output.
"""

import logging
import sys


_ROOT_NAME = "adoptions"


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Classes ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
class bcolors:  # noqa: N801
    """Small helper for print output coloring."""
    HEADER = '\033[95m'
    OKBLUE = '\033[94m'
    OKCYAN = '\033[96m'
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'
    UNDERLINE = '\033[4m'


class ColorFormatter(logging.Formatter):
    """Color the whole record by its level."""

    LEVEL_COLORS = {
        logging.DEBUG: bcolors.OKCYAN,
        logging.INFO: bcolors.OKBLUE,
        logging.WARNING: bcolors.WARNING,
        logging.ERROR: bcolors.FAIL,
        logging.CRITICAL: bcolors.FAIL + bcolors.BOLD,
    }

    def __init__(self, *, use_color: bool = True):
        """Create the formatter; `use_color=False` for non-tty streams."""
        super().__init__("%(levelname)s %(name)s: %(message)s")
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        """Format `record`, wrapping it in its level color."""
        text = super().format(record)
        if not self.use_color:
            return text
        return f"{self.LEVEL_COLORS.get(record.levelno, '')}{text}{bcolors.ENDC}"



# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~ Functions ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
def get_logger(name: str) -> logging.Logger:
    """Return a child of the package logger (pass `__name__`)."""
    if name.startswith(_ROOT_NAME):
        return logging.getLogger(name)
    return logging.getLogger(f"{_ROOT_NAME}.{name}")


def setup_logging(*, verbose: bool = False, stream=None) -> logging.Logger:
    """Attach the colored console handler to the package logger.

    Calling this again replaces the previous handler instead of stacking a new one.
    """
    stream = sys.stderr if stream is None else stream
    root = logging.getLogger(_ROOT_NAME)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    handler = logging.StreamHandler(stream)
    handler.setFormatter(ColorFormatter(use_color=hasattr(stream, "isatty") and stream.isatty()))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False
    return root
