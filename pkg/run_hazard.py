# run_hazard.py

import sys

from dotenv import load_dotenv

load_dotenv()

from app.cli import main  # noqa: E402  settings read the environment on import

if __name__ == "__main__":
    sys.exit(main())
