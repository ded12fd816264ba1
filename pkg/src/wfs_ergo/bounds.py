"""Runtime limits: sizes, answer counts, and time budgets.

All limits are optional; absent means unlimited.  They are meant to be
changed only between top-level queries (the session enforces this by
flushing tables whenever one changes).

Calibration note: the goal tripwire fires when the subgoal's symbol count
(term_size summed over arguments) exceeds the limit.  The answer tripwire
allows one extra symbol relative to its nominal limit, which reproduces the
reference listings for both tripwires under the single size metric; the
difference is that an answer's measured size covers only the argument
positions that were open (non-ground) in the subgoal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Tuple

ACTIONS = ("abstract", "error", "suspend")
TIMEOUT_MODES = ("undefined", "error")


class SettingsError(ValueError):
    pass


@dataclass
class RuntimeSettings:
    goalsize: Optional[Tuple[int, str]] = None
    answersize: Optional[Tuple[int, str]] = None
    maxanswers: Optional[Tuple[int, str]] = None
    timeout: Optional[Tuple[int, str]] = None    # (milliseconds, mode)
    nafmode: str = "not_exists"                  # or "u"
    subgoal_delay: bool = True
    undefined_error: bool = False
    bench_memory_cap_mb: int = 3000

    def set_limit(self, name: str, limit, action) -> None:
        if name in ("goalsize", "answersize", "maxanswers"):
            if action not in ACTIONS:
                raise SettingsError("unknown action %r for %s" % (action, name))
            if not isinstance(limit, int) or limit < 1:
                raise SettingsError("%s limit must be a positive integer" % name)
            setattr(self, name, (limit, action))
        elif name == "timeout":
            if action not in TIMEOUT_MODES:
                raise SettingsError("unknown timeout mode %r" % (action,))
            if not isinstance(limit, int) or limit < 1:
                raise SettingsError("timeout must be positive milliseconds")
            self.timeout = (limit, action)
        elif name == "nafmode":
            if limit not in ("u", "not_exists"):
                raise SettingsError("nafmode is u or not_exists")
            self.nafmode = limit
        else:
            raise SettingsError("unknown runtime setting %r" % (name,))

    def clear_limit(self, name: str) -> None:
        if name in ("goalsize", "answersize", "maxanswers", "timeout"):
            setattr(self, name, None)
        else:
            raise SettingsError("unknown runtime setting %r" % (name,))

    def deadline(self):
        """(deadline, start) pair for the engine, or None."""
        if self.timeout is None:
            return None
        now = time.monotonic()
        return (now + self.timeout[0] / 1000.0, now)
