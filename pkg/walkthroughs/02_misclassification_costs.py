"""
# Misclassification Cost Walkthrough - Counting Errors Is Not Enough
# Compares a real classifier with the always-negative rule at 1% minority
# NMC favors the useless rule; a weighted cost (FN x 100) does not
"""

import numpy as np
from termcolor import colored

from valguard import settings
from valguard.core import RngStream
from valguard.metrics import classification_counts, nmc, wmc
from valguard.simgen import gen_classifier_scores

# Constants
SEED = 3
THRESHOLDS = (0.5, 0.7, 0.99)


def main():
    labels, scores = gen_classifier_scores(1000, 0.01, settings.DEFAULT_DPRIME, RngStream(SEED))
    print(colored(f"\n🧮 {int(labels.sum())} positive rows out of {labels.size}", "cyan"))
    naive = classification_counts(labels, np.zeros_like(labels), 1.0, known_labels=[0.0, 1.0])
    print(colored(f"\nalways negative   NMC {nmc(naive):4d}   WMC {wmc(naive):7.1f}", "magenta"))
    for threshold in THRESHOLDS:
        counts = classification_counts(labels, (scores > threshold).astype(float), 1.0, known_labels=[0.0, 1.0])
        print(colored(f"threshold {threshold:<5}   NMC {nmc(counts):4d}   WMC {wmc(counts):7.1f}", "green"))


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print(colored("\nWalkthrough stopped by user.", "yellow"))
