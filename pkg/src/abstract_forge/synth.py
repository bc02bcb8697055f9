"""Hierarchical synthetic corpora in a small drawing language.

Programs compose parameterized motifs; motifs themselves reuse smaller
motifs, so iterated compression has layered structure to discover.
Lambdas appear through `repeat`-style loops whose body refers to the
loop index, which exercises the de Bruijn machinery.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .expr import Corpus, ExprStore

SHAPES = ["circle", "rect", "line", "arc", "hexagon", "octagon", "square"]
NUMBERS = ["0.5", "1", "1.5", "2", "3", "4", "5", "6", "8", "pi"]

# stop appending motifs once a program reaches this share of its sampled
# length; the last motif overshoots, and 0.7 lands the mean on target
_FILL = 0.7


@dataclass(frozen=True)
class SynthConfig:
    programs: int = 250
    mean_length: float = 76.0
    motifs: int = 12
    depth: int = 3
    seed: int = 0
    programs_per_task: int = 1


def _num(rng: random.Random) -> str:
    return rng.choice(NUMBERS)


class _Motif:
    """Template text with `{0}`, `{1}`, ... parameter slots."""

    def __init__(self, text: str, params: int):
        self.text = text
        self.params = params

    def fill(self, args: list[str]) -> str:
        return self.text.format(*args)


def _base_motifs(rng: random.Random) -> list[_Motif]:
    out = []
    for _ in range(4):
        shape = rng.choice(SHAPES)
        out.append(_Motif(f"(T ({shape} {{0}} {{1}}) (M {{2}} {_num(rng)} 0 0))", 3))
    for _ in range(3):
        shape = rng.choice(SHAPES)
        k = _num(rng)
        out.append(_Motif(
            f"(repeat (lam (T ({shape} {{0}} {k}) (M 1 (* $0 (/ (* 2 pi) {{1}})) 0 0))) {{1}})", 2))
    return out


def _compose(rng: random.Random, parts: list[_Motif]) -> _Motif:
    """Stack two or three motifs, sharing some parameters."""
    chosen = [rng.choice(parts) for _ in range(rng.randint(2, 3))]
    slot = 0
    pieces = []
    for m in chosen:
        args = []
        for _ in range(m.params):
            if slot and rng.random() < 0.3:
                args.append(f"{{{rng.randrange(slot)}}}")
            elif rng.random() < 0.35:
                args.append(_num(rng))
            else:
                args.append(f"{{{slot}}}")
                slot += 1
        pieces.append(m.fill(args))
    text = pieces[0]
    for p in pieces[1:]:
        text = f"(C {text} {p})"
    return _Motif(text, slot)


def _library(rng: random.Random, cfg: SynthConfig) -> list[list[_Motif]]:
    levels = [_base_motifs(rng)]
    for _ in range(cfg.depth - 1):
        prev = [m for lvl in levels for m in lvl]
        levels.append([_compose(rng, prev) for _ in range(cfg.motifs // max(1, cfg.depth - 1))])
    return levels


def _terminals(text: str) -> int:
    return sum(1 for tok in text.replace("(", " ").replace(")", " ").split() if tok != "lam")


def generate_texts(cfg: SynthConfig) -> list[str]:
    rng = random.Random(cfg.seed)
    levels = _library(rng, cfg)
    pool = [m for lvl in levels[1:] for m in lvl] or levels[0]
    texts = []
    for _ in range(cfg.programs):
        target = max(8, rng.gauss(cfg.mean_length, cfg.mean_length / 4))
        text = _instance(rng, pool, levels[0])
        while _terminals(text) < target * _FILL:
            text = f"(C {text} {_instance(rng, pool, levels[0])})"
        texts.append(text)
    return texts


def _instance(rng, pool, base) -> str:
    m = rng.choice(pool if rng.random() < 0.8 else base)
    return m.fill([_num(rng) for _ in range(m.params)])


def generate_corpus(cfg: SynthConfig | None = None, store: ExprStore | None = None) -> Corpus:
    cfg = cfg or SynthConfig()
    texts = generate_texts(cfg)
    tasks = [f"task_{i // cfg.programs_per_task}" for i in range(len(texts))]
    return Corpus.from_strings(texts, store, tasks)


def bundled_configs() -> dict[str, SynthConfig]:
    """Small corpora used by the ablation and determinism checks."""
    return {
        "shapes-small": SynthConfig(programs=20, mean_length=30, motifs=6, depth=2, seed=1),
        "shapes-nested": SynthConfig(programs=30, mean_length=40, motifs=8, depth=3, seed=2),
        "shapes-tasks": SynthConfig(programs=24, mean_length=30, motifs=6, depth=3, seed=3,
                                    programs_per_task=2),
    }

