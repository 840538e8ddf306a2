"""
# Leaky Selection Walkthrough - Selecting Variables Before Splitting
# Runs VIP-PLS on 20 x 1000 noise twice: selection on all rows, then inside the inner loop
# The leaky run is watermarked; only the in-loop number is an honest estimate
"""

from termcolor import colored

from valguard.core import RngStream, row_access_audit
from valguard.engine import PipelineSpec, double_cv
from valguard.plsfamily import SelectionSpec
from valguard.simgen import gen_fig5

# Constants
SEED = 5
THRESHOLDS = (1.0, 1.5, 2.0, 2.5)


def vip_pipeline(leaky: bool) -> PipelineSpec:
    return PipelineSpec(
        name="leaky" if leaky else "in-loop",
        selection_grid=tuple(SelectionSpec("vip", threshold=t) for t in THRESHOLDS),
        n_lv_grid=(0, 1, 2, 3),
        seed=SEED,
        leaky=leaky,
    )


def main():
    ds = gen_fig5(RngStream(SEED))
    print(colored(f"\n🕳️  {ds.n_rows} rows, {ds.n_vars} noise variables", "cyan"))
    with row_access_audit() as log:
        leaky = double_cv(ds, vip_pipeline(True), demonstrate_leakage=True)
    everything = [r for r in log if r.purpose == "leaky_selection"]
    print(colored(f"   leaky run read {len(everything[0].row_ids)} rows before any split", "yellow"))
    honest = double_cv(ds, vip_pipeline(False))
    print(colored(f"\nleaky    Q2 = {leaky.summary['median']:+.2f}   [{leaky.watermark}]", "red"))
    print(colored(f"in-loop  Q2 = {honest.summary['median']:+.2f}", "green"))


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print(colored("\nWalkthrough stopped by user.", "yellow"))
