"""Deterministic seed derivation.

Every random draw in a sweep is keyed by (base seed, experiment id, trial).
The experiment id is mixed in through CRC-32 so that the stream depends on
the name of the experiment rather than on its position in a batch, and
numpy's SeedSequence does the remaining integer mixing.
"""

import zlib

import numpy as np


def experiment_key(experiment_id):
    """Stable 32-bit integer for an experiment identifier."""
    return zlib.crc32(str(experiment_id).encode("utf-8")) & 0xFFFFFFFF


def trial_rng(seed, experiment_id, trial, *extra):
    """Generator for one trial of one experiment.

    `extra` integers (e.g. a field index) give independent sub-streams.
    """
    entropy = [int(seed) & 0xFFFFFFFF, experiment_key(experiment_id), int(trial)]
    entropy.extend(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(entropy))
