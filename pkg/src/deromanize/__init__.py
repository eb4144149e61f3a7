"""Finite-state decipherment of informally romanized text.

Noisy-channel cascade: a character n-gram model of the original script
composed with a delay-limited edit-operation channel, trained without
parallel text by stepwise EM in the expectation semiring and decoded by
tropical shortest path.
"""

from .automata import SymbolTable, Wfst, chain_acceptor, compose, shortest_distance, shortest_path
from .channel import DelayLimit, EmissionParams, PriorSpec, build_emission_fst, init_params, load_prior
from .corpus import SyntheticChannel, generate_synthetic, preprocess
from .decode_eval import ConfusionMatrix, Decoded, cer, confusion, decode
from .ngram import NgramModel, count_ngrams, entropy_prune, score, to_wfsa, witten_bell
from .profiles import ARABIC, PROFILES, RUSSIAN, LanguageProfile, custom_profile
from .semiring import ExpectationWeight, LogWeight, TropicalWeight, arc_weight_with_basis
from .training import TrainConfig, estep_sentence, mstep, stepwise_update, train_supervised, train_unsupervised

__version__ = "0.1.0"
