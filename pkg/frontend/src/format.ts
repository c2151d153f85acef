/** Display formatting for feature values.
 *
 * Currency and score formatting is fixed (whole dollars, integer scores) so
 * the UI never implies precision the payload lacks. Deltas are shown exactly
 * as the payload states them — no client-side recomputation.
 */

import type { Profile } from "./types.js";

export const EMPLOYMENT_LABELS = ["Unemployed", "Self-employed", "Private", "Government"];
export const EDUCATION_LABELS = ["HighSchool", "Associate", "Bachelor", "Master", "Doctorate"];

export const FEATURE_TITLES: Record<keyof Profile, string> = {
  income: "Annual income",
  credit_score: "Credit score",
  employment_type: "Employment",
  education_level: "Education",
  loan_amount: "Loan amount",
};

export function formatValue(feature: keyof Profile, value: number): string {
  switch (feature) {
    case "income":
    case "loan_amount":
      return "$" + Math.round(value).toLocaleString("en-US");
    case "credit_score":
      return String(Math.round(value));
    case "employment_type":
      return EMPLOYMENT_LABELS[value] ?? String(value);
    case "education_level":
      return EDUCATION_LABELS[value] ?? String(value);
  }
}

/** Exact decimal text of a payload number, unrounded. */
export function exact(value: number | null): string {
  return value === null ? "n/a" : String(value);
}
