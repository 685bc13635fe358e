#!/usr/bin/env python3
"""Rebuild an a9a-layout LIBSVM file from the raw UCI Adult training split.

The LIBSVM a9a set is the Adult training file with every attribute turned
into binary indicators: six continuous attributes quantized into bins and
eight categorical ones one-hot encoded, 123 features in total.  The exact
bin edges of the original preprocessing are not published, so the edges
below are equal-frequency cuts on the training data (with explicit edges
where ties make quantiles degenerate).  Missing values ("?") produce no
indicator for that attribute.

Usage: adult_to_a9a.py adult.data > a9a
"""

import bisect
import sys

WORKCLASS = "Private, Self-emp-not-inc, Self-emp-inc, Federal-gov, Local-gov, State-gov, Without-pay, Never-worked"
EDUCATION = ("Bachelors, Some-college, 11th, HS-grad, Prof-school, Assoc-acdm, Assoc-voc, 9th, 7th-8th, "
             "12th, Masters, 1st-4th, 10th, Doctorate, 5th-6th, Preschool")
MARITAL = "Married-civ-spouse, Divorced, Never-married, Separated, Widowed, Married-spouse-absent, Married-AF-spouse"
OCCUPATION = ("Tech-support, Craft-repair, Other-service, Sales, Exec-managerial, Prof-specialty, "
              "Handlers-cleaners, Machine-op-inspct, Adm-clerical, Farming-fishing, Transport-moving, "
              "Priv-house-serv, Protective-serv, Armed-Forces")
RELATIONSHIP = "Wife, Own-child, Husband, Not-in-family, Other-relative, Unmarried"
RACE = "White, Asian-Pac-Islander, Amer-Indian-Eskimo, Other, Black"
SEX = "Female, Male"
COUNTRY = ("United-States, Cambodia, England, Puerto-Rico, Canada, Germany, Outlying-US(Guam-USVI-etc), "
           "India, Japan, Greece, South, China, Cuba, Iran, Honduras, Philippines, Italy, Poland, Jamaica, "
           "Vietnam, Mexico, Portugal, Ireland, France, Dominican-Republic, Laos, Ecuador, Taiwan, Haiti, "
           "Columbia, Hungary, Guatemala, Nicaragua, Scotland, Thailand, Yugoslavia, El-Salvador, "
           "Trinadad&Tobago, Peru, Hong, Holand-Netherlands")


def categories(text):
    return [c.strip() for c in text.split(",")]


# Upper-exclusive bin edges: value v falls in bin bisect_right(edges, v).
AGE_EDGES = [26, 33, 41, 50]
FNLWGT_EDGES = [106000, 158000, 197000, 260000]
EDUNUM_EDGES = [9, 10, 11, 13]
GAIN_EDGES = [1]
LOSS_EDGES = [1]
HOURS_EDGES = [35, 40, 41, 50]

# (column, kind, payload) in output order; widths sum to 123.
LAYOUT = [
    (0, "bin", AGE_EDGES),
    (1, "cat", categories(WORKCLASS)),
    (2, "bin", FNLWGT_EDGES),
    (3, "cat", categories(EDUCATION)),
    (4, "bin", EDUNUM_EDGES),
    (5, "cat", categories(MARITAL)),
    (6, "cat", categories(OCCUPATION)),
    (7, "cat", categories(RELATIONSHIP)),
    (8, "cat", categories(RACE)),
    (9, "cat", categories(SEX)),
    (10, "bin", GAIN_EDGES),
    (11, "bin", LOSS_EDGES),
    (12, "bin", HOURS_EDGES),
    (13, "cat", categories(COUNTRY)),
]


def width(kind, payload):
    return len(payload) + 1 if kind == "bin" else len(payload)


def encode(fields):
    indices = []
    offset = 1
    for column, kind, payload in LAYOUT:
        raw = fields[column]
        if raw != "?":
            if kind == "bin":
                indices.append(offset + bisect.bisect_right(payload, float(raw)))
            else:
                indices.append(offset + payload.index(raw))
        offset += width(kind, payload)
    return indices


def main():
    total = sum(width(k, p) for _, k, p in LAYOUT)
    assert total == 123, total
    with open(sys.argv[1]) as fh:
        for line in fh:
            fields = [f.strip() for f in line.strip().split(",")]
            if len(fields) != 15:
                continue
            label = "+1" if fields[14].rstrip(".") == ">50K" else "-1"
            feats = " ".join(f"{i}:1" for i in encode(fields))
            sys.stdout.write(f"{label} {feats}\n")


if __name__ == "__main__":
    main()
