"""The six-item reference pool T1 and pool builders shared by the tests."""

import numpy as np

from sismon import Pool

T1_IDS = [1, 2, 3, 4, 5, 6]
T1_Z = [1, 0, 0, 0, 1, 0]
T1_SCORES = [0.9, 0.1, 0.2, 0.2, 0.8, 0.4]
T1_GROUP = ["A", "A", "A", "A", "B", "B"]

T1_CSV = "id,score,pred_label,true_label,attr_stratum\n" + "".join(
    f"{i},{s},0,{z},{g}\n" for i, s, z, g in zip(T1_IDS, T1_SCORES, T1_Z, T1_GROUP)
)


def make_pool(scores, z, assignment=None, ids=None):
    """Oracle-complete pool with pred_label 0 and true_label = z."""
    n = len(scores)
    attrs = {} if assignment is None else {"stratum": np.asarray(assignment, dtype=float)}
    return Pool(ids if ids is not None else np.arange(n), scores, np.zeros(n, dtype=int), z, attrs)
