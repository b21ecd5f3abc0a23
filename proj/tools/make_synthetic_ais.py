#!/usr/bin/env python3
"""Generate data/ais_synthetic.csv, a synthetic stand-in for the AIS sample.

The real Australian Institute of Sport data (202 athletes) is not bundled;
see fetch_ais.py for obtaining it.  This script draws a dataset with the
same schema and a similar two-cluster structure so that the default test
surface stays self-contained: body measurements (BMI, SSF, PBF, LBM) follow
a two-component Gaussian-mixture SUR model on red cell count and plasma
ferritin, with cluster membership associated with sex.

Standard library only.  Deterministic for a fixed seed.
"""

import argparse
import math
import random

COLUMNS = ["SEX", "RCC", "WCC", "PFC", "BMI", "SSF", "PBF", "LBM"]

WEIGHTS = [0.619, 0.381]
LAMBDA = [
    [10.04, 86.57, 23.19, -7.02],
    [12.99, 136.43, 32.52, -4.88],
]
SIGMA = [
    [
        [3.96, 5.14, -0.09, 18.99],
        [5.14, 169.94, 31.21, 2.63],
        [-0.09, 31.21, 7.10, -8.73],
        [18.99, 2.63, -8.73, 138.82],
    ],
    [
        [6.85, 17.43, 0.89, 14.59],
        [17.43, 744.38, 107.03, -54.50],
        [0.89, 107.03, 17.88, -15.05],
        [14.59, -54.50, -15.05, 67.07],
    ],
]
# Rows: BMI, SSF, PBF, LBM; columns: RCC, PFC.  SSF uses RCC only.
BETA = [
    [2.286, 0.013],
    [-7.746, 0.0],
    [-2.724, -0.005],
    [14.211, 0.052],
]

MALES = 102
FEMALES = 100
P_CLUSTER1_MALE = 86.0 / 102.0
P_CLUSTER1_FEMALE = 39.0 / 100.0


def cholesky(matrix):
    n = len(matrix)
    lower = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1):
            accum = sum(lower[i][k] * lower[j][k] for k in range(j))
            if i == j:
                lower[i][j] = math.sqrt(matrix[i][i] - accum)
            else:
                lower[i][j] = (matrix[i][j] - accum) / lower[j][j]
    return lower


def draw_row(rng, sex, chol):
    cluster = 0 if rng.random() < (
        P_CLUSTER1_MALE if sex == "male" else P_CLUSTER1_FEMALE) else 1
    rcc = rng.gauss(5.0 if sex == "male" else 4.4, 0.4)
    wcc = max(rng.gauss(7.1, 1.8), 1.5)
    pfc = math.exp(rng.gauss(4.2, 0.55))
    shock = [rng.gauss(0.0, 1.0) for _ in range(4)]
    lower = chol[cluster]
    row = []
    for d in range(4):
        noise = sum(lower[d][k] * shock[k] for k in range(d + 1))
        mean = LAMBDA[cluster][d] + BETA[d][0] * rcc + BETA[d][1] * pfc
        row.append(mean + noise)
    bmi, ssf, pbf, lbm = row
    return [sex, rcc, wcc, pfc, bmi, ssf, pbf, lbm]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=20240202)
    parser.add_argument("--out", default="data/ais_synthetic.csv")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    chol = [cholesky(s) for s in SIGMA]
    rows = [draw_row(rng, "male", chol) for _ in range(MALES)]
    rows += [draw_row(rng, "female", chol) for _ in range(FEMALES)]
    rng.shuffle(rows)

    with open(args.out, "w") as out:
        out.write(",".join(COLUMNS) + "\n")
        for row in rows:
            cells = [row[0]] + [f"{value:.10g}" for value in row[1:]]
            out.write(",".join(cells) + "\n")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
