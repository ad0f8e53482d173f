"""Emoji-tagged stderr logging.

Library modules only call ``logging.getLogger(__name__)``; the CLI is the one
place that installs a handler through :func:`configure_logging`.
"""

import logging
import sys

LEVEL_MARKS = {
    logging.DEBUG: "🔍",
    logging.INFO: "📊",
    logging.WARNING: "⚠️ ",
    logging.ERROR: "❌",
    logging.CRITICAL: "❌",
}


class MarkFormatter(logging.Formatter):
    """Prefix each record with the mark of its level."""

    def format(self, record: logging.LogRecord) -> str:
        record.mark = LEVEL_MARKS.get(record.levelno, "•")
        return super().format(record)


def configure_logging(level: str = "INFO") -> logging.Logger:
    root = logging.getLogger("omad")
    numeric = logging.getLevelName(str(level).upper())
    if not isinstance(numeric, int):
        numeric = logging.INFO
    root.setLevel(numeric)
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(MarkFormatter("%(mark)s %(message)s"))
    root.addHandler(handler)
    root.propagate = False
    return root
