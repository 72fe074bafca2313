"""Counter-based random streams.

The stream for (experiment seed, purpose salt, replica, step) is the Philox
generator with key (seed XOR salt, replica) and block counter (0, 0, step, 0):
every step owns 2^64 blocks, so streams never overlap, any cell can be
reproduced in isolation, and results are independent of scheduling or worker
count.  `ReplicaStreams` reuses one generator per purpose and resets its
counter per step, which is much cheaper than constructing Philox each call;
the returned generator is only valid until the next request for the same
purpose.
"""

import numpy as np

_SALTS = {
    "noise": np.uint64(0x9E3779B97F4A7C15),
    "particles": np.uint64(0xD1B54A32D192ED03),
    "init": np.uint64(0x8CB92BA72F3D8DD7),
    "white": np.uint64(0xBF58476D1CE4E5B9),
    "calib": np.uint64(0x94D049BB133111EB),
}


def _key(seed, salt, replica):
    k0 = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _SALTS[salt]
    return np.array([k0, np.uint64(replica)], dtype=np.uint64)


def _counter(step):
    return np.array([0, 0, np.uint64(step), 0], dtype=np.uint64)


def stream(seed, salt, replica=0, step=0):
    """Fresh Generator for the (seed, salt, replica, step) cell."""
    if salt not in _SALTS:
        raise KeyError(f"unknown stream salt {salt!r}")
    bg = np.random.Philox(key=_key(seed, salt, replica), counter=_counter(step))
    return np.random.Generator(bg)


class _PurposeStream:
    """One cached Philox whose counter is reset for every requested step."""

    def __init__(self, seed, salt, replica):
        self._bg = np.random.Philox(key=_key(seed, salt, replica))
        self._gen = np.random.Generator(self._bg)
        self._counter = np.zeros(4, dtype=np.uint64)
        st = self._bg.state
        st["state"] = {"counter": self._counter, "key": st["state"]["key"]}
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._state = st

    def at_step(self, step):
        # the state setter copies values, so mutating the template is safe
        self._counter[2] = step
        self._bg.state = self._state
        return self._gen


class ReplicaStreams:
    """Per-replica bundle of purpose-specific counter-based streams."""

    def __init__(self, seed, replica=0):
        self.seed = int(seed)
        self.replica = int(replica)
        self._streams = {}

    def _get(self, salt, step):
        ps = self._streams.get(salt)
        if ps is None:
            ps = _PurposeStream(self.seed, salt, self.replica)
            self._streams[salt] = ps
        return ps.at_step(step)

    def noise(self, step):
        return self._get("noise", step)

    def particles(self, step):
        return self._get("particles", step)

    def white(self, step):
        return self._get("white", step)

    def init(self):
        return self._get("init", 0)
