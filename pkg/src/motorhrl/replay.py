"""Ring-buffer replay for both levels.

The low-level buffer stores one row per environment step. The high-level buffer stores
single-step records in one contiguous ring per rollout lane (one lane per parallel
environment), so k-step windows can be reassembled at sampling time from consecutive
slots without interleaving from other environments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ReplayBuffer:
    """Column store with ring overwrite and uniform seeded sampling."""

    def __init__(self, capacity: int, fields: dict[str, tuple[tuple[int, ...], type]]):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.data = {k: np.zeros((self.capacity, *shape), dtype=dt) for k, (shape, dt) in fields.items()}
        self.ptr = 0
        self.size = 0
        self.total = 0

    def __len__(self) -> int:
        return self.size

    def push(self, **rows) -> None:
        """Append a batch of rows; every field needs the same leading length."""
        n = len(next(iter(rows.values())))
        if set(rows) != set(self.data):
            raise KeyError(f"expected fields {sorted(self.data)}, got {sorted(rows)}")
        idx = (self.ptr + np.arange(n)) % self.capacity
        for k, v in rows.items():
            self.data[k][idx] = v
        self.ptr = int((self.ptr + n) % self.capacity)
        self.size = min(self.size + n, self.capacity)
        self.total += n

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, batch_size)

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        idx = self.sample_indices(batch_size, rng)
        return {k: v[idx] for k, v in self.data.items()}

    def ordered(self) -> dict[str, np.ndarray]:
        """Stored rows, oldest first."""
        if self.size < self.capacity:
            return {k: v[: self.size].copy() for k, v in self.data.items()}
        order = (self.ptr + np.arange(self.capacity)) % self.capacity
        return {k: v[order] for k, v in self.data.items()}

    def dump(self, path) -> None:
        np.savez_compressed(path, **self.ordered())


def low_level_buffer(capacity: int, obs_dim: int, act_dim: int, skill_dim: int) -> ReplayBuffer:
    f32 = np.float32
    return ReplayBuffer(capacity, {
        "s": ((obs_dim,), f32),
        "s_next": ((obs_dim,), f32),
        "a": ((act_dim,), f32),
        "z": ((), np.int64),
        "z_c": ((skill_dim,), f32),
        "noise": ((skill_dim,), f32),
        "r_a": ((), np.float64),
        "r_f": ((), np.float64),
        "r_e": ((), np.float64),
        "h": ((), np.float64),
        "done": ((), bool),
    })


@dataclass
class HighBatch:
    s_plus: np.ndarray       # (B, D) window start
    z_c: np.ndarray          # (B, d) skill held over the window
    i: np.ndarray            # (B,) step index within the skill interval
    rewards: np.ndarray      # (B, k) zero-padded past n_rewards
    n_rewards: np.ndarray    # (B,)
    terminal: np.ndarray     # (B,) true terminal inside the window: bootstrap masked
    bootstrap: np.ndarray    # (B, D) s+ after the last window step

    def __len__(self) -> int:
        return len(self.i)


class HighReplay:
    """Per-lane rings of single-step high-level records."""

    FIELDS = ("s_plus", "s_plus_next", "z_c", "r_h", "i", "done", "truncated", "episode_id", "step_id")

    def __init__(self, capacity: int, n_lanes: int, splus_dim: int, skill_dim: int, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.n_lanes = n_lanes
        self.lane_cap = max(k, capacity // n_lanes)
        shape = (n_lanes, self.lane_cap)
        self.s_plus = np.zeros((*shape, splus_dim), np.float32)
        self.s_plus_next = np.zeros((*shape, splus_dim), np.float32)
        self.z_c = np.zeros((*shape, skill_dim), np.float32)
        self.r_h = np.zeros(shape)
        self.i = np.zeros(shape, np.int64)
        self.done = np.zeros(shape, bool)
        self.truncated = np.zeros(shape, bool)
        self.episode_id = np.full(shape, -1, np.int64)
        self.step_id = np.zeros(shape, np.int64)
        self.count = np.full(shape, -1, np.int64)  # insertion number within the lane
        self.lane_total = np.zeros(n_lanes, np.int64)

    def __len__(self) -> int:
        return int(np.minimum(self.lane_total, self.lane_cap).sum())

    def push(self, lanes, s_plus, s_plus_next, z_c, r_h, i, done, truncated, episode_id, step_id) -> None:
        lanes = np.asarray(lanes, dtype=np.int64)
        pos = self.lane_total[lanes] % self.lane_cap
        self.s_plus[lanes, pos] = s_plus
        self.s_plus_next[lanes, pos] = s_plus_next
        self.z_c[lanes, pos] = z_c
        self.r_h[lanes, pos] = r_h
        self.i[lanes, pos] = i
        self.done[lanes, pos] = done
        self.truncated[lanes, pos] = truncated
        self.episode_id[lanes, pos] = episode_id
        self.step_id[lanes, pos] = step_id
        self.count[lanes, pos] = self.lane_total[lanes]
        self.lane_total[lanes] += 1

    def _check(self, lane: np.ndarray, pos: np.ndarray):
        """Validate candidate window starts; returns (valid, window_len, last_pos, terminal)."""
        k = self.k
        n = len(lane)
        start_count = self.count[lane, pos]
        ep = self.episode_id[lane, pos]
        need = k - self.i[lane, pos]
        valid = start_count >= 0
        stopped = np.zeros(n, bool)      # a terminal has been reached
        win_len = np.zeros(n, np.int64)
        last = pos.copy()
        terminal = np.zeros(n, bool)
        for j in range(k):
            p = (pos + j) % self.lane_cap
            present = (self.count[lane, p] == start_count + j) & (self.episode_id[lane, p] == ep)
            active = valid & ~stopped
            valid &= present | stopped
            active &= present
            in_window = active & (j < need)
            win_len[in_window] = j + 1
            last[in_window] = p[in_window]
            hit_done = active & self.done[lane, p]
            terminal |= hit_done & in_window
            stopped |= hit_done
        return valid, win_len, last, terminal

    def sample_windows(self, batch_size: int, rng: np.random.Generator, max_tries: int = 50) -> HighBatch:
        filled = np.minimum(self.lane_total, self.lane_cap)
        if filled.sum() == 0:
            raise ValueError("cannot sample from an empty buffer")
        lanes_out, pos_out = [], []
        got = 0
        for _ in range(max_tries):
            m = 2 * (batch_size - got) + 8
            lane = rng.integers(0, self.n_lanes, m)
            pos = (rng.random(m) * filled[lane]).astype(np.int64)
            ok = filled[lane] > 0
            lane, pos = lane[ok], pos[ok]
            valid = self._check(lane, pos)[0]
            lanes_out.append(lane[valid])
            pos_out.append(pos[valid])
            got += int(valid.sum())
            if got >= batch_size:
                break
        if got == 0:
            raise ValueError("no complete high-level window in the buffer yet")
        lane = np.concatenate(lanes_out)[:batch_size]
        pos = np.concatenate(pos_out)[:batch_size]
        return self.gather(lane, pos)

    def gather(self, lane: np.ndarray, pos: np.ndarray) -> HighBatch:
        valid, win_len, last, terminal = self._check(lane, pos)
        if not valid.all():
            raise ValueError("gather() called with an invalid window start")
        k = self.k
        rewards = np.zeros((len(lane), k))
        for j in range(k):
            p = (pos + j) % self.lane_cap
            use = j < win_len
            rewards[use, j] = self.r_h[lane[use], p[use]]
        return HighBatch(
            s_plus=self.s_plus[lane, pos],
            z_c=self.z_c[lane, pos],
            i=self.i[lane, pos],
            rewards=rewards,
            n_rewards=win_len,
            terminal=terminal,
            bootstrap=self.s_plus_next[lane, last],
        )

    def valid_starts(self) -> tuple[np.ndarray, np.ndarray]:
        """All (lane, pos) pairs that currently start a complete window."""
        lanes, poss = [], []
        for ln in range(self.n_lanes):
            filled = int(min(self.lane_total[ln], self.lane_cap))
            pos = np.arange(filled)
            lane = np.full(filled, ln)
            v = self._check(lane, pos)[0] if filled else np.zeros(0, bool)
            lanes.append(lane[v])
            poss.append(pos[v])
        return np.concatenate(lanes), np.concatenate(poss)
