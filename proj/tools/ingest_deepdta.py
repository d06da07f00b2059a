#!/usr/bin/env python3
"""Convert a published Davis or KIBA dump into the three-CSV dataset layout.

Expected input directory (the layout used by the public DeepDTA release):
    ligands_can.txt   JSON object, drug id -> SMILES (file order = matrix rows)
    proteins.txt      JSON object, protein id -> sequence (file order = columns)
    Y                 pickled numpy matrix, drugs x proteins; NaN = unmeasured

Davis values are raw Kd in nM (the loader applies the pKd transform); KIBA
values are KIBA scores and pass through unchanged.
"""

import argparse
import csv
import json
import math
import pickle
from collections import OrderedDict
from pathlib import Path


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=Path, help="directory with ligands_can.txt, proteins.txt and Y")
    ap.add_argument("dst", type=Path, help="output directory for drugs.csv, proteins.csv, affinities.csv")
    args = ap.parse_args()

    ligands = json.loads((args.src / "ligands_can.txt").read_text(), object_pairs_hook=OrderedDict)
    proteins = json.loads((args.src / "proteins.txt").read_text(), object_pairs_hook=OrderedDict)
    with open(args.src / "Y", "rb") as f:
        y = pickle.load(f, encoding="latin1")

    drug_ids, protein_ids = list(ligands), list(proteins)
    if tuple(y.shape) != (len(drug_ids), len(protein_ids)):
        raise SystemExit(f"Y has shape {y.shape}, expected {len(drug_ids)} x {len(protein_ids)}")

    args.dst.mkdir(parents=True, exist_ok=True)
    with open(args.dst / "drugs.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "smiles"])
        w.writerows(ligands.items())
    with open(args.dst / "proteins.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "sequence"])
        w.writerows(proteins.items())
    written = 0
    with open(args.dst / "affinities.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["drug_id", "protein_id", "value"])
        for i, d in enumerate(drug_ids):
            for j, p in enumerate(protein_ids):
                v = float(y[i][j])
                if math.isnan(v):
                    continue
                w.writerow([d, p, repr(v)])
                written += 1
    print(json.dumps({"drugs": len(drug_ids), "proteins": len(protein_ids), "records": written}))


if __name__ == "__main__":
    main()
