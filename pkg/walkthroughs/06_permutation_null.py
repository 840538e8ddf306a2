"""
# Permutation Null Walkthrough - Is The Model Better Than Chance?
# Permutes Y, reruns the whole double CV per permutation and reports p = (1 + hits) / (1 + n_perm)
# The observed value is the median over repetitions of the unpermuted run
"""

from termcolor import colored

from valguard.core import RngStream
from valguard.dataprep import SplitPolicy
from valguard.engine import PipelineSpec, double_cv, permutation_null
from valguard.simgen import gen_fig6

# Constants
SEED = 4
N_PERM = 19


def main():
    ds, _ = gen_fig6(RngStream(SEED))
    spec = PipelineSpec(name="PLS", n_lv_grid=tuple(range(6)), outer_policy=SplitPolicy(n_folds=5),
                        inner_policy=SplitPolicy(n_folds=5), n_repetitions=3, seed=SEED)
    report = double_cv(ds, spec)
    result = permutation_null(ds, spec, N_PERM, report=report)
    report.attach_null(result)
    print(colored(f"\n🎲 observed Q2 {result.observed:+.3f}", "cyan"))
    print(colored(f"   null Q2 range {min(result.null_distribution):+.3f} .. {max(result.null_distribution):+.3f}",
                  "magenta"))
    print(colored(f"   p = {report.p_value_vs_null:.3f} (smallest possible {1 / (N_PERM + 1):.3f})", "green"))


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print(colored("\nWalkthrough stopped by user.", "yellow"))
