"""
# ROC Imbalance Walkthrough - Same Classifier, Unstable AUROC
# Draws classifier scores at 30% and 1% minority and compares the AUROC spread
# Shows how few positive rows make a ranking metric noisy
"""

from termcolor import colored

from valguard import settings
from valguard.core import RngStream
from valguard.metrics import roc_curve
from valguard.simgen import gen_classifier_scores

# Constants
SEED = 7
N_ROWS = 1000
REPLICATES = 10
FRACTIONS = (0.3, 0.01)


def auroc_spread(fraction: float) -> list[float]:
    root = RngStream(SEED)
    aurocs = []
    for rep in range(REPLICATES):
        labels, scores = gen_classifier_scores(N_ROWS, fraction, settings.DEFAULT_DPRIME, root.spawn(rep))
        aurocs.append(roc_curve(scores, labels, 1.0).auroc)
    return aurocs


def main():
    print(colored("\n📈 AUROC over repeated draws of the same classifier", "cyan"))
    for fraction in FRACTIONS:
        aurocs = auroc_spread(fraction)
        print(colored(f"\n{fraction:.0%} minority", "magenta"))
        print(colored(f"   min {min(aurocs):.3f}  max {max(aurocs):.3f}  spread {max(aurocs) - min(aurocs):.3f}",
                      "green"))


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print(colored("\nWalkthrough stopped by user.", "yellow"))
