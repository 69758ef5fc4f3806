import logging
import sys

from dotenv import load_dotenv

# Load environment variables from .env file (seed and path overrides)
load_dotenv()

from app.cli import main

# Log to stderr; stdout carries the stdio protocol and JSON summaries
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)

if __name__ == "__main__":
    sys.exit(main())
