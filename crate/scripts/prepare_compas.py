"""Build data/compas.csv from the raw ProPublica two-year recidivism file.

Applies the row filters of the ProPublica analysis notebook and keeps its
selected columns, adding length_of_stay (days between jail in and out).

Usage: python3 scripts/prepare_compas.py compas-scores-two-years.csv data/compas.csv
"""
import sys

import pandas as pd

COLUMNS = [
    "age", "c_charge_degree", "race", "age_cat", "score_text", "sex",
    "priors_count", "days_b_screening_arrest", "decile_score",
    "length_of_stay", "two_year_recid",
]


def main(src, dst):
    df = pd.read_csv(src)
    df = df[(df.days_b_screening_arrest <= 30)
            & (df.days_b_screening_arrest >= -30)
            & (df.is_recid != -1)
            & (df.c_charge_degree != "O")
            & (df.score_text != "N/A")]
    stay = pd.to_datetime(df.c_jail_out) - pd.to_datetime(df.c_jail_in)
    df = df.assign(length_of_stay=(stay.dt.total_seconds() / 86400.0).round(4))
    df[COLUMNS].to_csv(dst, index=False)
    print(f"wrote {len(df)} rows to {dst}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
