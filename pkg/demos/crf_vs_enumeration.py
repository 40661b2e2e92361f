"""Check the CRF layer against exhaustive enumeration.

For a sequence of length 6 over the four boundary labels there are only
4^6 = 4096 label sequences, so the partition function and the best path
can be computed by brute force and compared with the dynamic programs.
"""

import itertools

import numpy as np

from eraseg.autodiff import Tensor
from eraseg.corpus import TAGS
from eraseg.crf import N_LABELS, START, log_partition, viterbi

T = 6
rng = np.random.default_rng(42)
emit = rng.normal(size=(T, N_LABELS))
trans = rng.normal(size=(N_LABELS + 1, N_LABELS))  # row START holds start scores


def path_score(tags):
    score = trans[START, tags[0]] + emit[0, tags[0]]
    for t in range(1, T):
        score += trans[tags[t - 1], tags[t]] + emit[t, tags[t]]
    return score


scores = np.array([path_score(seq) for seq in itertools.product(range(N_LABELS), repeat=T)])
brute_log_z = np.logaddexp.reduce(scores)
forward_log_z = log_partition(Tensor(emit), Tensor(trans)).value[0, 0]
print(f"enumerated log Z over {len(scores)} sequences: {brute_log_z:.10f}")
print(f"forward-algorithm log Z:                      {forward_log_z:.10f}")
assert abs(brute_log_z - forward_log_z) < 1e-9

best = max(itertools.product(range(N_LABELS), repeat=T), key=path_score)
path, score = viterbi(emit, trans)
print(f"enumerated best path: {[TAGS[t] for t in best]} score {path_score(best):.6f}")
print(f"viterbi best path:    {[TAGS[t] for t in path]} score {score:.6f}")
assert list(best) == path
print("dynamic programs match enumeration.")
