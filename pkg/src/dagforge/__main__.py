"""``python -m dagforge dagify|dagent ...``"""

from __future__ import annotations

import sys

from .cli import _configure_logging, main

if __name__ == "__main__":
    if len(sys.argv) < 2 or sys.argv[1] not in ("dagify", "dagent"):
        sys.stderr.write("usage: python -m dagforge dagify|dagent <verb> ...\n")
        sys.exit(4)
    _configure_logging()
    sys.exit(main(sys.argv[1], sys.argv[2:]))
