"""``python -m steadyrnn``."""

from steadyrnn.cli import main

raise SystemExit(main())
