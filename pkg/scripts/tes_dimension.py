"""Local-PCA dimension estimates of teacher-equivalent parameter clouds.

Two clouds are built and estimated:

* constructed: explicit teacher-equivalent points from the block-triangular
  embedding (fcdnn teacher [2,2,1] into student [2,4,1]); the estimate is
  compared with the embedding's free dimension;
* sampled: near-interpolators of a linear student on a large dataset, whose
  teacher-equivalent set is a single point.

    python scripts/tes_dimension.py [--points 500] [--repeats 200] [--floor 6]
"""

import argparse
import json

import numpy as np

from interplab.data import make_teacher
from interplab.dimest import PointCloud, estimate_tes_dimension, lpca_estimate
from interplab.linalg import SeededRng
from interplab.models import NetworkSpec
from interplab.samplers import SamplerConfig
from interplab.theory import embed_fcdnn, sample_tes_point


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--floor", type=float, default=6.0, help="noise floor in units of epsilon")
    p.add_argument("--sampler", default="pattern_search")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-cloud", help="write the constructed cloud as CSV")
    args = p.parse_args()

    teacher = make_teacher(NetworkSpec((2, 2, 1), "tanh", "fcdnn"), SeededRng(args.seed, 1))
    student = NetworkSpec((2, 4, 1), "tanh", "fcdnn")
    free = embed_fcdnn(teacher, student, SeededRng(args.seed, 2)).free_dimension
    cloud = PointCloud(np.array([sample_tes_point(teacher, student, SeededRng(s, 3)).data
                                 for s in range(args.points)]), "constructed")
    if args.save_cloud:
        with open(args.save_cloud, "w") as fh:
            fh.write(cloud.to_csv())
    est = lpca_estimate(cloud)
    print(json.dumps({"cloud": "constructed", "free_dimension": free, **est.to_dict()}))

    linear = NetworkSpec((2, 1))
    est = estimate_tes_dimension(make_teacher(linear, SeededRng(args.seed, 1)), linear,
                                 SamplerConfig(epsilon=args.epsilon), args.n_train, args.repeats,
                                 SeededRng(args.seed, 2), sampler=args.sampler, floor_factor=args.floor)
    print(json.dumps({"cloud": "linear near-interpolators", **est.to_dict()}))


if __name__ == "__main__":
    main()
