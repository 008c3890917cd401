#!/usr/bin/env python
"""FlowForge command-line launcher.

Runs the pipeline without installing the package::

    python FlowForge/FlowForge.py prepare events.csv scores.csv
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from FlowForgeLib.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
