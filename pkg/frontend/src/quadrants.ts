import type { Quadrant } from "./api.js";

// 2x2 arousal/valence grid, reading order: high arousal on top,
// negative valence on the left.
export interface QuadrantCell {
  quadrant: Quadrant;
  words: string;
  axis: string;
}

export const QUADRANT_GRID: QuadrantCell[] = [
  { quadrant: "Q2", words: "tension, anger, fear", axis: "high arousal / negative valence" },
  { quadrant: "Q1", words: "joy, wonder, power", axis: "high arousal / positive valence" },
  { quadrant: "Q3", words: "sadness, bitterness", axis: "low arousal / negative valence" },
  { quadrant: "Q4", words: "tenderness, peacefulness, transcendence", axis: "low arousal / positive valence" },
];
