#!/usr/bin/env python3
"""Writes data/catalog.txt and data/probabilities.tbl.

The numbers are invented for testing the engine. They are not clinical data.
Named signs get hand-set per-disease probabilities; the unnamed catalog slots
are split deterministically between the diseases so that every disease has a
few characteristic signs.
"""
import pathlib
import sys

DISEASES = [
    "ABM", "AcuteViralMeningitis", "TuberculousMeningitis", "Encephalitis", "BrainAbscess",
    "Meningism", "MeningealReactionNearbyInflammation", "MeningealHaemorrhage", "BrainTumor",
]
PRIORS = [0.30, 0.20, 0.05, 0.10, 0.05, 0.10, 0.08, 0.07, 0.05]

NAMED = [
    ("convulsions",                    [.40, .15, .20, .45, .35, .05, .10, .30, .40]),
    ("depression",                     [.30, .20, .30, .25, .20, .10, .10, .20, .25]),
    ("fever",                          [.90, .80, .60, .70, .60, .70, .60, .20, .10]),
    ("hypertense_fontanelle",          [.45, .25, .30, .20, .35, .10, .10, .40, .45]),
    ("nape_stiffness",                 [.70, .55, .50, .20, .30, .60, .40, .60, .15]),
    ("trunk_stiffness",                [.40, .20, .30, .10, .15, .30, .20, .30, .05]),
    ("skin_purpuric_syndrome",         [.30, .02, .01, .02, .01, .02, .02, .03, .01]),
    ("vomits",                         [.60, .50, .40, .40, .45, .40, .30, .50, .55]),
    ("somnolence",                     [.55, .30, .40, .60, .40, .15, .20, .50, .35]),
    ("irritability",                   [.60, .45, .40, .40, .30, .35, .30, .30, .20]),
    ("facial_paralysis",               [.05, .02, .15, .05, .15, .01, .02, .05, .20]),
    ("cervical_adenopathies",          [.10, .15, .35, .05, .05, .30, .35, .02, .05]),
    ("haemocultivation_with_bacteria", [.50, .01, .05, .01, .15, .02, .10, .01, .01]),
    ("bacteria_in_csf",                [.65, .01, .05, .01, .05, .01, .02, .01, .01]),
    ("muscular_hypotonicity",          [.35, .20, .20, .30, .20, .10, .10, .25, .30]),
    ("csf_cloudy_aspect",              [.35, .00, .00, .00, .00, .00, .00, .00, .00]),
    ("csf_clear_aspect",               [.10, .85, .20, .75, .50, .60, .60, .05, .60]),
    ("hydrocephaly_in_ecography",      [.05, .01, .20, .03, .10, .01, .02, .15, .40]),
    ("tumors_in_tomography",           [.01, .00, .01, .01, .15, .00, .01, .02, .80]),
    ("koch_bacillus",                  [.00, .00, .45, .00, .00, .00, .00, .00, .00]),
    ("csf_crystalline_aspect",         [.02, .05, .65, .05, .05, .02, .05, .02, .05]),
]
CATALOG_SIZE = 81
MAIN, SECOND, BACKGROUND = 0.55, 0.25, 0.04


def placeholder_row(slot):
    row = [BACKGROUND] * len(DISEASES)
    row[slot % len(DISEASES)] = MAIN
    row[(slot + 4) % len(DISEASES)] = SECOND
    return row


def main(out_dir):
    out = pathlib.Path(out_dir)
    rows = list(NAMED)
    for i in range(len(NAMED), CATALOG_SIZE):
        rows.append((f"unnamed_sign_{i:02d}", placeholder_row(i - len(NAMED))))

    with open(out / "catalog.txt", "w") as f:
        f.write("# index name influential\n")
        f.write("# Signs named in the source literature come first; unnamed_sign_NN are\n")
        f.write("# placeholders that keep the catalog at its documented size of 81.\n")
        f.write("# All influential flags are 0, so the adaptation rules decide the set.\n")
        for i, (name, _) in enumerate(rows):
            f.write(f"{i} {name} 0\n")

    with open(out / "probabilities.tbl", "w") as f:
        f.write("# SYNTHETIC, NON-CLINICAL example table. Generated by tools/make_synthetic_data.py.\n")
        f.write("# Values are invented; they only give each diagnosis a distinct profile.\n\n")
        f.write("[priors]\n")
        for d, p in zip(DISEASES, PRIORS):
            f.write(f"{d} {p}\n")
        f.write("\n[conditionals]\n")
        f.write("symptom " + " ".join(DISEASES) + "\n")
        for name, row in rows:
            f.write(name + " " + " ".join(f"{p:g}" for p in row) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).resolve().parent.parent / "data")
