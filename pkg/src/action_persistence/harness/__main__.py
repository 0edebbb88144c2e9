from __future__ import annotations

import sys

from action_persistence.harness.cli import main

sys.exit(main())
