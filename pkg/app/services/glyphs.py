"""
Embedded bitmap font and the plate charset.

Each glyph is a 5x9 cell: two accent rows above a 5x7 base letter. The
charset holds 52 symbols (digits, Latin capitals, 14 Vietnamese accented
letters and two separators); with the CTC blank that gives 53 classes.
Class index = charset position + 1, index 0 is the blank.
"""

from functools import lru_cache
from typing import Dict, List, Sequence

import numpy as np
import numpy.typing as npt

from app.core.error_handlers import UnknownCharacterError

GLYPH_WIDTH = 5
GLYPH_HEIGHT = 9
ACCENT_ROWS = 2

_BASE: Dict[str, List[str]] = {
    "0": [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
    "1": ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    "2": [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    "3": ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
    "4": ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    "5": ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    "6": ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
    "7": ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    "8": [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    "9": [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
    "A": [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    "B": ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."],
    "C": [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."],
    "D": ["###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."],
    "E": ["#####", "#....", "#....", "####.", "#....", "#....", "#####"],
    "F": ["#####", "#....", "#....", "####.", "#....", "#....", "#...."],
    "G": [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"],
    "H": ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    "I": [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."],
    "J": ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."],
    "K": ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"],
    "L": ["#....", "#....", "#....", "#....", "#....", "#....", "#####"],
    "M": ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"],
    "N": ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"],
    "O": [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    "P": ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."],
    "Q": [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"],
    "R": ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"],
    "S": [".####", "#....", "#....", ".###.", "....#", "....#", "####."],
    "T": ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."],
    "U": ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    "V": ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."],
    "W": ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."],
    "X": ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"],
    "Y": ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."],
    "Z": ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"],
    "Đ": ["###..", "#..#.", "#...#", "###.#", "#...#", "#..#.", "###.."],
    "-": [".....", ".....", ".....", ".###.", ".....", ".....", "....."],
    ".": [".....", ".....", ".....", ".....", ".....", ".##..", ".##.."],
}

_ACCENTS: Dict[str, List[str]] = {
    "none": [".....", "....."],
    "acute": ["...#.", "..#.."],
    "grave": [".#...", "..#.."],
    "breve": ["#...#", ".###."],
    "circumflex": ["..#..", ".#.#."],
    "horn": ["....#", "...##"],
}

# Accented letter -> (base letter, accent)
_COMPOSED: Dict[str, tuple] = {
    "Ă": ("A", "breve"),
    "Â": ("A", "circumflex"),
    "Ê": ("E", "circumflex"),
    "Ô": ("O", "circumflex"),
    "Ơ": ("O", "horn"),
    "Ư": ("U", "horn"),
    "Á": ("A", "acute"),
    "À": ("A", "grave"),
    "É": ("E", "acute"),
    "È": ("E", "grave"),
    "Ó": ("O", "acute"),
    "Ò": ("O", "grave"),
    "Ú": ("U", "acute"),
}

DIGITS = "0123456789"
LATIN = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
EXTRAS = "ĐĂÂÊÔƠƯÁÀÉÈÓÒÚ-."
CHARSET = DIGITS + LATIN + EXTRAS
BLANK_INDEX = 0
NUM_CLASSES = len(CHARSET) + 1


def _cell(rows: Sequence[str]) -> npt.NDArray[np.float64]:
    return np.array([[1.0 if ch == "#" else 0.0 for ch in row] for row in rows])


@lru_cache(maxsize=None)
def glyph_bitmap(symbol: str) -> npt.NDArray[np.float64]:
    """5x9 ink mask (1 = ink) for one symbol."""
    if symbol in _COMPOSED:
        base, accent = _COMPOSED[symbol]
    elif symbol in _BASE:
        base, accent = symbol, "none"
    else:
        raise UnknownCharacterError(symbol)
    bitmap = _cell(_ACCENTS[accent] + _BASE[base])
    bitmap.setflags(write=False)
    return bitmap


def encode_text(text: str, charset: str = CHARSET) -> List[int]:
    """Map text to class indices (1-based, blank excluded)."""
    indices = []
    for ch in text:
        pos = charset.find(ch)
        if pos < 0:
            raise UnknownCharacterError(ch)
        indices.append(pos + 1)
    return indices


def decode_labels(labels: Sequence[int], charset: str = CHARSET) -> str:
    return "".join(charset[k - 1] for k in labels if k != BLANK_INDEX)
