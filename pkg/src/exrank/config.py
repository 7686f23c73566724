"""Run configuration and seeded random substreams.

All randomness flows from one root seed through named substreams, so changing
one stage's draw count cannot perturb another stage.
"""

import dataclasses
import zlib
from dataclasses import dataclass

import numpy as np

from .corpus import Task


@dataclass
class Config:
    task: Task = Task.ASPE
    k: int = 4                 # in-context examples at inference; also the C+/C- size
    m: int = 50                # candidates scored per query during retriever training
    r: float = 0.1             # labeling subset ratio
    batch_size: int = 2
    lr: float = 5e-5
    weight_decay: float = 0.01
    grad_accum: int = 2        # exposed knob; the reference loop updates per step
    epochs_retriever: int = 4
    epochs_lm: int = 2
    finetune_k: int = 1        # retrieved examples per fine-tuning prompt
    t: int = 3                 # alternating steps
    d: int = 64                # scorer embedding width
    d_r: int = 64              # retriever embedding width
    max_len: int = 128
    max_gen_len: int = 24
    seed: int = 0
    warmup_epochs: int = 1     # zero-example scorer warm-up before step 1
    reinit_per_step: bool = False
    template_dir: str = None
    accept_hash: bool = False

    def __post_init__(self):
        self.task = Task(self.task)
        if not (0.0 < self.r <= 1.0):
            raise ValueError(f"r must be in (0, 1], got {self.r}")
        for name in ("k", "m", "batch_size", "epochs_retriever", "epochs_lm",
                     "finetune_k", "t", "d", "d_r", "max_len", "max_gen_len",
                     "warmup_epochs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["task"] = self.task.value
        return out

    @classmethod
    def from_dict(cls, values):
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in fields:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw)
        return cls(**kwargs)


_BOOL_KEYS = {"reinit_per_step", "accept_hash"}
_FLOAT_KEYS = {"r", "lr", "weight_decay"}
_STR_KEYS = {"task", "template_dir"}


def _coerce(key, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    if key in _STR_KEYS:
        return raw
    if key in _BOOL_KEYS:
        return raw.lower() in ("1", "true", "yes", "on")
    if key in _FLOAT_KEYS:
        return float(raw)
    return int(raw)


def read_config_file(path):
    """Flat key=value file; '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line {line_no}: {line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def substream(seed, name):
    """A Generator deterministically derived from (root seed, stream name)."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))
