/** Client-side recomputation of the judge's weighted final score. */

import type { EnsembleSource } from "./api.js";

/** Dimension names in the order the server reports scores and weights. */
export const DIMENSIONS = [
  "correctness",
  "legality",
  "completeness",
  "clarity",
  "faithfulness",
] as const;

/** Recomputed and server finals must agree within this before we flag the item. */
export const SCORE_TOLERANCE = 1e-6;

/** Weighted sum of dimension scores; lengths must match. */
export function weightedFinal(scores: readonly number[], weights: readonly number[]): number {
  if (scores.length !== weights.length) {
    throw new Error(`got ${scores.length} scores but ${weights.length} weights`);
  }
  let total = 0;
  for (let i = 0; i < scores.length; i++) {
    total += (scores[i] as number) * (weights[i] as number);
  }
  return total;
}

/** Whether the payload carries enough data to recompute the final score. */
export function canRecompute(source: EnsembleSource): boolean {
  return source.dimension_scores.length > 0 && source.dimension_scores.length === source.weights.length;
}

/**
 * True when the recomputed weighted sum disagrees with the server's final.
 * Items without per-dimension data are never flagged — there is nothing to check.
 */
export function finalMismatch(source: EnsembleSource): boolean {
  if (!canRecompute(source)) return false;
  const recomputed = weightedFinal(source.dimension_scores, source.weights);
  return Math.abs(recomputed - source.final_score) > SCORE_TOLERANCE;
}

/** Fixed-width score rendering so table columns line up. */
export function formatScore(value: number): string {
  return value.toFixed(3);
}
