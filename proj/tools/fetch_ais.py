#!/usr/bin/env python3
"""Fetch the real AIS dataset and convert it to the column layout mixsur uses.

The 202-athlete sample from the Australian Institute of Sport ships with the
R package DAAG and is mirrored in the Rdatasets collection.  This script
downloads that CSV and renames/selects columns:

    rcc    -> RCC   red blood cell count
    wcc    -> WCC   white blood cell count
    ferr   -> PFC   plasma ferritin concentration
    bmi    -> BMI   body mass index
    ssf    -> SSF   sum of skin folds
    pcBfat -> PBF   percentage of body fat
    lbm    -> LBM   lean body mass
    sex    -> SEX

If the download fails (no network), fetch the file yourself and rerun with
--input, or point any AIS copy with the DAAG column names at this script.
"""

import argparse
import csv
import io
import sys
import urllib.request

URL = "https://vincentarelbundock.github.io/Rdatasets/csv/DAAG/ais.csv"
RENAME = {
    "rcc": "RCC",
    "wcc": "WCC",
    "ferr": "PFC",
    "bmi": "BMI",
    "ssf": "SSF",
    "pcBfat": "PBF",
    "lbm": "LBM",
    "sex": "SEX",
}
OUT_COLUMNS = ["SEX", "RCC", "WCC", "PFC", "BMI", "SSF", "PBF", "LBM"]


def convert(reader, out_path):
    source = {name: old for old, name in RENAME.items()}
    missing = [source[c] for c in OUT_COLUMNS
               if source[c] not in reader.fieldnames]
    if missing:
        sys.exit(f"input lacks expected columns: {', '.join(missing)}")
    rows = list(reader)
    with open(out_path, "w", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(OUT_COLUMNS)
        for row in rows:
            writer.writerow([row[source[c]] for c in OUT_COLUMNS])
    print(f"wrote {len(rows)} rows to {out_path}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--input", help="already-downloaded ais.csv")
    parser.add_argument("--out", default="data/ais.csv")
    args = parser.parse_args()

    if args.input:
        with open(args.input, newline="") as handle:
            convert(csv.DictReader(handle), args.out)
        return

    try:
        with urllib.request.urlopen(URL, timeout=30) as response:
            text = response.read().decode("utf-8")
    except OSError as error:
        sys.exit(f"download failed ({error}); fetch {URL} manually and rerun "
                 f"with --input ais.csv")
    convert(csv.DictReader(io.StringIO(text)), args.out)


if __name__ == "__main__":
    main()
