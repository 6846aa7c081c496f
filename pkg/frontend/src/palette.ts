/**
 * The single source of class colors. Blue family encodes true, orange
 * false, neutral gray unknown; all picked from a colorblind-safe palette.
 * Every class-colored element in the UI must draw from these constants.
 */

export type CellClass = "true" | "false" | "unknown";

export const TRUE_SHADES = ["#c6dbef", "#6baed6", "#2171b5"] as const; // light -> dark
export const FALSE_SHADES = ["#fdd0a2", "#fd8d3c", "#d94801"] as const;
export const UNKNOWN_COLOR = "#bdbdbd";
export const BOILERPLATE_COLOR = "#999999";

export const PALETTE: ReadonlySet<string> = new Set([
  ...TRUE_SHADES,
  ...FALSE_SHADES,
  UNKNOWN_COLOR,
]);

/** Lightness step for a calibrated probability: |p-0.5| in
 *  [tau, 0.25) -> 0, [0.25, 0.4) -> 1, [0.4, 0.5] -> 2. */
export function shadeStep(p: number): 0 | 1 | 2 {
  const d = Math.abs(p - 0.5);
  if (d < 0.25) return 0;
  if (d < 0.4) return 1;
  return 2;
}

export function classColor(cls: CellClass, probability: number | null): string {
  if (cls === "unknown" || probability === null) return UNKNOWN_COLOR;
  const shades = cls === "true" ? TRUE_SHADES : FALSE_SHADES;
  return shades[shadeStep(probability)];
}

/** Strong color for indicator terms and histogram bars. */
export function polarityColor(polarity: boolean): string {
  return polarity ? TRUE_SHADES[2] : FALSE_SHADES[2];
}

export function unknownColor(): string {
  return UNKNOWN_COLOR;
}
