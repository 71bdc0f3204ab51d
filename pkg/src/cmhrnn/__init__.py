"""Chord-conditioned hierarchical recurrent melody generation (numpy, hand-written backprop)."""

from .codec import ChordSymbol, ChordTimeline, Key, LeadSheet, MusicEvent, parse_lead_sheet
from .generator import SamplingConfig, generate
from .hrnn import TierConfig, init_params
from .trainer import TrainHyper, Trainer, split_dataset, train

__version__ = "0.1.0"
