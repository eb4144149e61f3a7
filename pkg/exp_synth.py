# scratch experiment driver for tuning the synthetic decipherment setup
import math
import sys
import time

import numpy as np

LEX = 250

from deromanize.automata import prune_arcs
from deromanize.channel import DelayLimit, PriorSpec, build_emission_fst
from deromanize.corpus import SyntheticChannel, generate_synthetic, sample_toy_corpus
from deromanize.decode_eval import corpus_cer, decode_corpus
from deromanize.ngram import count_ngrams, entropy_prune, perplexity, to_wfsa, witten_bell
from deromanize.profiles import custom_profile
from deromanize.semiring import TropicalWeight
from deromanize.training import TrainConfig, train_supervised, train_unsupervised

t_start = time.monotonic()


def tick(label):
    print(f"[{time.monotonic() - t_start:7.1f}s] {label}", flush=True)


# --- language + cipher ---------------------------------------------------
n_lm_sentences = 8000  # ~200k chars
lm_corpus = sample_toy_corpus(n_lm_sentences, seed=11, lexicon_size=LEX)
total_chars = sum(len(s) for s in lm_corpus)
chars = sorted(set("".join(lm_corpus)))
letters = [c for c in chars if c != " "]
lm_theta = (float(sys.argv[sys.argv.index("--lm-theta") + 1])
            if "--lm-theta" in sys.argv else 1e-6)
tick(f"lm corpus: {total_chars} chars, alphabet {len(chars)}, lm theta {lm_theta}")

rng = np.random.default_rng(99)
perm = list(letters)
while True:
    rng.shuffle(perm)
    if all(a != b for a, b in zip(letters, perm)):
        break
cipher = dict(zip(letters, perm))
cipher[" "] = " "
channel_true = SyntheticChannel({c: {cipher[c]: 1.0} for c in chars}, seed=7)

train_latin, _ = generate_synthetic(sample_toy_corpus(2000, seed=12, lexicon_size=LEX), channel_true, 2000)
test_latin, test_gold = generate_synthetic(sample_toy_corpus(200, seed=13, lexicon_size=LEX), channel_true, 200)
sup_latin, sup_gold = generate_synthetic(sample_toy_corpus(200, seed=14, lexicon_size=LEX), channel_true, 200)

profile = custom_profile(chars, chars, delay=1)

# --- LMs ------------------------------------------------------------------
lms = {}
for order in (2, 3, 4, 5, 6):
    m = witten_bell(count_ngrams(lm_corpus, order), k=10.0, alphabet=chars)
    if order >= 3:
        theta = lm_theta if order == 3 else 2 * lm_theta
        m = entropy_prune(m, theta)
    lms[order] = m
    tick(f"lm order {order}: {m.num_entries()} entries, ppl {perplexity(m, test_gold):.2f}")

# --- priors ---------------------------------------------------------------
prior = PriorSpec()
rng2 = np.random.default_rng(5)
for i, c in enumerate(letters):
    prior.alpha[(c, cipher[c])] = 5.0
    for j in range(2):  # distractors
        t = letters[int(rng2.integers(len(letters)))]
        prior.alpha[(c, t)] = prior.alpha.get((c, t), 0.0) + 2.0

config = TrainConfig(order_schedule=(2, 3, 4, 5, 6), batches_per_stage=40,
                     delay=1, restarts=1)


def mapping_accuracy(params):
    ok = 0
    for c in letters:
        fam = params.families[c]
        best = max((t for t in fam if t is not None), key=lambda t: fam[t])
        ok += best == cipher[c]
    return ok


def run_decode(params, label):
    st, lt = profile.source_table(), profile.latin_table()
    T = to_wfsa(lms[6], table=st, weight_cls=TropicalWeight)
    S = prune_arcs(build_emission_fst(params, DelayLimit(1), st, lt,
                                      weight_cls=TropicalWeight), 4.5)
    hyps = decode_corpus(T, S, test_latin, lt)
    summary = corpus_cer(hyps, test_gold)
    tick(f"{label}: CER={summary.cer:.4f} mapping={mapping_accuracy(params)}/{len(letters)}")
    print("   sample:", hyps[0][:48], "|", test_gold[0][:48])
    return summary.cer


which = {a for a in sys.argv[1:] if not a.startswith("--") and not a.replace(".","").replace("e-","").isdigit()} or {"prior", "uniform", "sup"}

if "prior" in which:
    tick("training unsupervised with informative prior")
    params_a, trace_a = train_unsupervised(train_latin, lms, config, prior, profile, seed=0)
    cer_a = run_decode(params_a, "informative prior")

if "uniform" in which:
    tick("training unsupervised with uniform prior")
    params_b, trace_b = train_unsupervised(train_latin, lms, config, None, profile, seed=0)
    cer_b = run_decode(params_b, "uniform prior")

if "sup" in which:
    tick("training supervised")
    sup_config = TrainConfig(order_schedule=(2, 3, 4, 5, 6), delay=1,
                             supervised_iterations=5)
    params_c, trace_c = train_supervised(list(zip(sup_latin, sup_gold)), lms[6],
                                         sup_config, None, profile, seed=0)
    cer_c = run_decode(params_c, "supervised")

tick("done")
