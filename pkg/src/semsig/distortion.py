"""Simulated object-detection errors applied to query signatures."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Alphabet, Signature

LEVEL_OPS = {"none": 0, "light": 1, "medium": 7, "strong": 13}


class Op(enum.Enum):
    MISS = "miss-detection"
    FALSE = "false-detection"
    RECLASS = "false-classification"


_OPS = (Op.MISS, Op.FALSE, Op.RECLASS)


@dataclass(frozen=True)
class DistortionConfig:
    """Distortion settings.

    ``level`` picks the number of type-level operations (none/light/medium/
    strong = 0/1/7/13). Passing ``op_count`` overrides it; angle noise is then
    applied whenever ``angle_noise_sigma`` is positive.
    """

    level: str = "none"
    op_count: int | None = None
    angle_noise_sigma: float = 5.0
    angle_noise_clip: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if self.level not in LEVEL_OPS:
            raise ValueError(f"unknown distortion level {self.level!r}")
        if self.op_count is not None and self.op_count < 0:
            raise ValueError("op_count must be nonnegative")
        if self.angle_noise_sigma < 0 or self.angle_noise_clip < 0:
            raise ValueError("angle noise parameters must be nonnegative")

    @property
    def ops(self) -> int:
        return LEVEL_OPS[self.level] if self.op_count is None else self.op_count

    @property
    def applies_noise(self) -> bool:
        if self.op_count is None:
            return self.level != "none"
        return self.angle_noise_sigma > 0

    def with_seed(self, seed: int) -> "DistortionConfig":
        return DistortionConfig(self.level, self.op_count, self.angle_noise_sigma, self.angle_noise_clip, seed)

    def describe(self) -> dict:
        return {
            "level": self.level,
            "op_count": self.ops,
            "angle_noise_sigma": self.angle_noise_sigma,
            "angle_noise_clip": self.angle_noise_clip,
            "angle_noise": self.applies_noise,
        }


def query_seed(master_seed: int, index: int) -> int:
    """Independent 64-bit seed for query ``index`` of a run."""
    ss = np.random.SeedSequence([master_seed & 0xFFFFFFFFFFFFFFFF, index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def distort(sig: Signature, cfg: DistortionConfig, alphabet: Alphabet, q: int, trace: list | None = None) -> Signature:
    """Apply ``cfg.ops`` random detection errors and angle noise to ``sig``.

    Original elements are placed at the center of their angle bin; inserted
    objects get a uniform raw angle. After noise the elements are re-sorted
    by raw angle (stable, so equal angles keep their sequence order) and
    re-quantized. If ``trace`` is given, the operations drawn are appended.
    """
    rng = np.random.default_rng(cfg.seed)
    step = 360.0 / q
    symbols = alphabet.symbols
    items = [[s, b * step + step / 2.0] for s, b in zip(sig.types, sig.angle_bins)]

    for _ in range(cfg.ops):
        op = _OPS[int(rng.integers(3))]
        if op is Op.MISS:
            if items:
                del items[int(rng.integers(len(items)))]
                if trace is not None:
                    trace.append(op)
            elif trace is not None:
                trace.append(None)
        elif op is Op.FALSE:
            cls = symbols[int(rng.integers(len(symbols)))]
            angle = float(rng.uniform(0.0, 360.0))
            items.insert(int(rng.integers(len(items) + 1)), [cls, angle])
            if trace is not None:
                trace.append(op)
        else:
            if items and len(symbols) > 1:
                i = int(rng.integers(len(items)))
                others = [s for s in symbols if s != items[i][0]]
                items[i][0] = others[int(rng.integers(len(others)))]
                if trace is not None:
                    trace.append(op)
            elif trace is not None:
                trace.append(None)

    if cfg.applies_noise and items:
        noise = rng.normal(0.0, cfg.angle_noise_sigma, size=len(items))
        noise = np.clip(noise, -cfg.angle_noise_clip, cfg.angle_noise_clip)
        for it, e in zip(items, noise):
            it[1] = (it[1] + float(e)) % 360.0

    items.sort(key=lambda it: it[1])
    bins = []
    for _, a in items:
        b = int(np.floor(a / step)) % q
        bins.append(b)
    return Signature("".join(it[0] for it in items), tuple(bins))
