"""Offensive-language identification pipeline.

Modules: normalize (tweet text cleanup), corpus (datasets, thresholding,
class weighting), features (OFSFEAT1 container + alignment), mlp (dense
aggregation head), ensemble (soft voting, stacking), baseline (tf-idf +
Naive Bayes), metrics (macro F1), cli (subcommands).
"""

__version__ = "0.1.0"
