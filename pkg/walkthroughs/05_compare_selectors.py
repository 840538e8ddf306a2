"""
# Selector Comparison Walkthrough - PLS, SR-PLS, VIP-PLS and sPLS
# Repeated double CV on the informative-block simulation, shared outer splits
# Prints medians, IQRs, the paired SR vs VIP test and per-pipeline timing
"""

from termcolor import colored

from valguard import settings
from valguard.core import RngStream
from valguard.engine import compare_models, double_cv
from valguard.figures import fig6_pipelines
from valguard.simgen import gen_fig6

# Constants
SEED = 2
REPETITIONS = 10


def main():
    ds, informative = gen_fig6(RngStream(SEED))
    print(colored(f"\n🧪 informative variables: {informative.tolist()}", "cyan"))
    reports = {}
    for spec in fig6_pipelines(SEED, REPETITIONS):
        report = double_cv(ds, spec, threads=settings.env_threads())
        reports[spec.name] = report
        print(colored(f"{spec.name:8s} median Q2 {report.summary['median']:+.3f}  IQR {report.summary['iqr']:.3f}"
                      f"  ({report.total_seconds:.1f}s)", "green"))
    result = compare_models(reports["SR-PLS"], reports["VIP-PLS"])
    print(colored(f"\nSR-PLS vs VIP-PLS: p = {result.p_value:.3f} ({result.test_method})", "magenta"))
    print(colored(f"⚠️  {result.caveats[0]}", "yellow"))


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print(colored("\nWalkthrough stopped by user.", "yellow"))
