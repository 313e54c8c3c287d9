"""Precision-first tag playlists from track predictions."""

from __future__ import annotations

import os
from dataclasses import dataclass

from .corpus import Label
from .track_model import TrackPrediction

DEFAULT_CAP = 1000


@dataclass(frozen=True)
class Playlist:
    tag: Label
    entries: tuple[str, ...]
    cap: int = DEFAULT_CAP

    def render(self) -> str:
        return "\n".join([f"# tag={self.tag.value} cap={self.cap}", *self.entries]) + "\n"

    def write(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())

    @classmethod
    def read(cls, path: str | os.PathLike) -> "Playlist":
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        fields = dict(part.split("=", 1) for part in lines[0].lstrip("# ").split())
        return cls(Label.parse(fields["tag"]), tuple(lines[1:]), int(fields["cap"]))


def generate_playlist(predictions, tag: Label, cap: int = DEFAULT_CAP,
                      min_margin: float = 0.0) -> Playlist:
    """Tracks predicted as ``tag`` with margin toward it above ``min_margin``.

    Ordered by that margin (descending, ISRC breaks ties) and truncated to ``cap``.
    """
    if cap < 1:
        raise ValueError("playlist cap must be >= 1")
    tag = Label(tag)
    toward = tag.sign
    picked = []
    seen = set()
    for p in predictions:
        m = toward * p.margin
        if p.predicted_label is tag and m > min_margin and p.isrc not in seen:
            seen.add(p.isrc)
            picked.append((-m, p.isrc))
    picked.sort()
    return Playlist(tag, tuple(isrc for _, isrc in picked[:cap]), cap)


__all__ = ["DEFAULT_CAP", "Playlist", "TrackPrediction", "generate_playlist"]
