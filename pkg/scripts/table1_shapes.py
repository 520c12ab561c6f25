"""Variable counts of generated instances at the reference benchmark shapes.

The eligibility sets behind the reference counts are not available, so counts depend on the
eligibility density; this prints the position-encoding and arc-model
counts for each shape at a few densities, next to the reference counts.

    python scripts/table1_shapes.py --densities 0.2,0.3,0.5 --seed 0
"""

import argparse
import csv
import sys

from schedbal.instance import generate_instance
from schedbal.mip import count_mip_variables
from schedbal.qubo import count_variables

# jobs, machines, reference BQP variables, reference MIP variables
SHAPES = [
    (27, 9, 2012, 2432), (27, 9, 2092, 2518), (45, 9, 4905, 5550), (48, 8, 5065, 5684),
    (50, 10, 9507, 10448), (60, 10, 10211, 11182), (60, 15, 11897, 13184), (63, 9, 12310, 13324),
    (63, 9, 12379, 13396), (63, 9, 12616, 13642), (72, 9, 12620, 13640), (60, 15, 12695, 14024),
    (75, 15, 20119, 21790), (60, 20, 20414, 22362), (60, 20, 21341, 23334), (90, 15, 28056, 30024),
    (80, 20, 31585, 33998), (80, 20, 33202, 35672), (100, 20, 47732, 50694), (160, 20, 151556, 156810),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--densities", default="0.2,0.3,0.5,1.0")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)
    densities = [float(d) for d in a.densities.split(",")]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["row", "jobs", "machines", "density", "vars_bqp", "vars_mip", "reference_bqp", "reference_mip"])
    for row, (J, M, pub_b, pub_m) in enumerate(SHAPES, 1):
        for d in densities:
            inst = generate_instance(J, M, d, seed=a.seed + row)
            w.writerow([row, J, M, d, count_variables(inst), count_mip_variables(inst), pub_b, pub_m])


if __name__ == "__main__":
    main()
