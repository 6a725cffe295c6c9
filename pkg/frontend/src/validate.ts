const MAX_CODE_POINT = 255;

/**
 * An emoticon must be exactly two characters, each fitting in 8 bits.
 * Returns an error message, or null when the value is acceptable.
 */
export function validateEmoticon(value: string): string | null {
  const points = [...value];
  if (points.length !== 2) {
    return `must be exactly 2 characters (got ${points.length})`;
  }
  for (const ch of points) {
    const code = ch.codePointAt(0) ?? 0;
    if (code > MAX_CODE_POINT) {
      return `character "${ch}" cannot be encoded in 8 bits`;
    }
  }
  return null;
}

export function validateShots(value: number): string | null {
  if (!Number.isInteger(value) || value < 1) {
    return 'shots must be a positive integer';
  }
  if (value > 1_000_000) {
    return 'shots capped at 1000000';
  }
  return null;
}
