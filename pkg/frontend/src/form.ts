/** Client-side validation of the feature entry form: every field must
 * parse as a finite number before any request is sent. */

export type ValidationResult =
  | { ok: true; values: Record<string, number> }
  | { ok: false; errors: Record<string, string> };

export function validateFeatures(raw: Record<string, string>): ValidationResult {
  const values: Record<string, number> = {};
  const errors: Record<string, string> = {};
  for (const [name, text] of Object.entries(raw)) {
    const trimmed = text.trim();
    if (trimmed === "") {
      errors[name] = "required";
      continue;
    }
    const value = Number(trimmed);
    if (!Number.isFinite(value)) {
      errors[name] = "not a number";
      continue;
    }
    values[name] = value;
  }
  if (Object.keys(errors).length > 0) return { ok: false, errors };
  return { ok: true, values };
}
