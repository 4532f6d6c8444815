"""
Preparing the public RHC extract
================================

The right heart catheterization data is distributed as ``rhc.csv`` with
text-coded treatment, outcome and categorical covariates. This script
turns it into the all-numeric layout the loader expects: ``z`` (1 = RHC),
``y`` (1 = died within 30 days), then covariates, with categorical
variables expanded into 0/1 indicators (first level dropped).

Usage::

    python3 demos/prepare_rhc.py rhc.csv rhc_prepared.csv
    balweights weigh --config docs/rhc_config.json --data rhc_prepared.csv

See ``docs/rhc_schema.md`` for the covariate list and its caveats.
"""

import csv
import sys

NUMERIC = [
    "age", "edu", "das2d3pc", "surv2md1", "aps1", "scoma1", "wtkilo1", "temp1", "meanbp1",
    "resp1", "hrt1", "pafi1", "paco21", "ph1", "wblc1", "hema1", "sod1", "pot1", "crea1",
    "bili1", "alb1", "cardiohx", "chfhx", "dementhx", "psychhx", "chrpulhx", "renalhx",
    "liverhx", "gibledhx", "malighx", "immunhx", "transhx", "amihx",
]
YES_NO = ["resp", "card", "neuro", "gastr", "renal", "meta", "hema", "seps", "trauma", "ortho", "dnr1"]
CATEGORICAL = ["sex", "race", "income", "ninsclas", "cat1", "ca"]


def slug(s):
    return "".join(ch if ch.isalnum() else "_" for ch in s.strip().lower()).strip("_")


def main(src, dst):
    with open(src, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    levels = {c: sorted({r[c] for r in rows}) for c in CATEGORICAL}
    header = ["z", "y"] + NUMERIC + YES_NO
    for c in CATEGORICAL:
        header += [f"{c}_{slug(v)}" for v in levels[c][1:]]
    with open(dst, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for r in rows:
            rec = [int(r["swang1"] == "RHC"), int(r["dth30"] == "Yes")]
            rec += [r[c] for c in NUMERIC]
            rec += [int(r[c] == "Yes") for c in YES_NO]
            for c in CATEGORICAL:
                rec += [int(r[c] == v) for v in levels[c][1:]]
            out.writerow(rec)
    print(f"wrote {len(rows)} rows and {len(header) - 2} covariates to {dst}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit("usage: prepare_rhc.py rhc.csv prepared.csv")
    main(sys.argv[1], sys.argv[2])
