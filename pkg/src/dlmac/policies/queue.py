import numpy as np


class RssiQueue:
    """Believed RSSI history per channel: sensed values plus compensation.

    Only the newest ``capacity`` values per channel are retained.  Values are
    clipped into ``bounds`` when given.
    """

    def __init__(self, channels, capacity, bounds=None):
        self.channels = tuple(int(c) for c in channels)
        self.capacity = int(capacity)
        self.bounds = bounds
        self._buf = np.empty((2 * self.capacity + 1024, len(self.channels)))
        self._end = 0
        self.pushed = 0

    def __len__(self):
        return min(self._end, self.capacity)

    def index(self, channel):
        return self.channels.index(int(channel))

    def push(self, values):
        """Append rows (one value per channel per row)."""
        v = np.asarray(values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None] if len(self.channels) == 1 else v[None, :]
        if self.bounds is not None:
            v = np.clip(v, *self.bounds)
        n = v.shape[0]
        if n >= self.capacity:
            self._buf[:self.capacity] = v[-self.capacity:]
            self._end = self.capacity
        else:
            if self._end + n > self._buf.shape[0]:
                keep = self._buf[self._end - self.capacity + n:self._end].copy()
                self._buf[:keep.shape[0]] = keep
                self._end = keep.shape[0]
            self._buf[self._end:self._end + n] = v
            self._end += n
        self.pushed += n

    def tail(self, channel, n):
        if n > len(self):
            raise ValueError(f"queue holds {len(self)} values, {n} requested")
        return self._buf[self._end - n:self._end, self.index(channel)].copy()
