"""LSTM sequence kernels with a compiled fast path.

The timestep recurrence dominates training time, so it is implemented twice:
a Cython extension (built at install time) and a numpy fallback. The backend
is chosen once at import. Set MAGNET_KERNEL=python or MAGNET_KERNEL=compiled
to force a choice; the default prefers the extension and silently falls back.

Both backends implement the same contract:

    lstm_forward(x, wx, wh, b, reverse) -> (h_states, cache)
    lstm_backward(cache, d_h_states)   -> (dx, dwx, dwh, db)

with gate order [input, forget, candidate, output] along the 4h axis.
"""

import os

_requested = os.environ.get("MAGNET_KERNEL", "auto").strip().lower()

if _requested == "python":
    from . import _lstm_np as _impl

    BACKEND = "python"
else:
    try:
        from . import _lstm_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _lstm_np as _impl

        BACKEND = "python"

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward

__all__ = ["lstm_forward", "lstm_backward", "BACKEND"]
