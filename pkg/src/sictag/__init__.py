"""Song / Instrumental tagging of whole music tracks.

Stage 1 turns frame MFCCs into per-frame singing-voice probabilities with a
random forest; stage 2 summarises them into a 79-value track vector that a
boosted tree ensemble labels Song or Instrumental.
"""

__version__ = "0.1.0"
