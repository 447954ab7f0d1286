"""
Entry point for the canaryaudit CLI
"""

from .cli import main

if __name__ == "__main__":
    main()
