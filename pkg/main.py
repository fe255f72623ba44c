import logging
import os
import sys
from typing import List, Optional

from app.cli import get_parser
from app.common.config import configure_logging
from app.common.errors import ForecasterError

# Numeric libraries read their thread caps when first imported
THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _cap_threads(argv: List[str]) -> None:
    if "--threads" in argv:
        index = argv.index("--threads")
        if index + 1 < len(argv):
            for name in THREAD_ENV_VARS:
                os.environ.setdefault(name, argv[index + 1])


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _cap_threads(argv)
    try:
        # Type converters such as --split raise ConfigError while parsing
        args = get_parser().parse_args(argv)
        configure_logging(args.log_level)
        return args.handler(args)
    except ForecasterError as e:
        logging.error(f"{type(e).__name__}: {e.message}")
        if any(v is not None for v in e.detail.values()):
            logging.error(f"Detail: {e.detail}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
