import sys
from pathlib import Path

# --- Setup Project Root ---
PROJECT_ROOT = Path(__file__).resolve().parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))
# ---------------------------

from cli.commands import run  # noqa: E402


def main() -> int:
    """Entry point: `python main.py <subcommand> ...`; see `python main.py --help`."""
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
