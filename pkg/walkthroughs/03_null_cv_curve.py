"""
# Null CV Curve Walkthrough - The 0-LV Baseline
# Fits PLS with 0..6 latent variables on X and y that are unrelated
# Leave-one-out PRESS never beats the mean-only model by much
"""

from termcolor import colored

from valguard.core import RngStream
from valguard.engine import PipelineSpec, inner_cv_select
from valguard.metrics import MetricSpec
from valguard.simgen import gen_fig4

# Constants
SEED = 11


def main():
    ds = gen_fig4(RngStream(SEED))
    spec = PipelineSpec(name="null", n_lv_grid=tuple(range(7)), metric=MetricSpec.from_name("press"))
    selection = inner_cv_select(ds, spec, RngStream(SEED).spawn(0))
    print(colored(f"\n📉 LOO PRESS on a {ds.n_rows} x {ds.n_vars} null dataset", "cyan"))
    for n_lv, press in selection.curve.items():
        marker = "  <- mean only" if n_lv == 0 else ""
        print(colored(f"   {n_lv} LV: {press:8.3f}{marker}", "green" if n_lv == 0 else "magenta"))
    print(colored(f"\nchosen: {selection.chosen.n_lv} LV", "yellow"))


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print(colored("\nWalkthrough stopped by user.", "yellow"))
