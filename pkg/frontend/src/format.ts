/** Display formatting only; no arithmetic on measurement fields. */

export function fmtSeconds(value: number): string {
  return value.toFixed(2);
}

export function fmtJoules(value: number): string {
  return value.toFixed(2);
}

export function fmtEdp(value: number): string {
  return value.toFixed(2);
}

export function fmtGoodness(value: number | null | undefined): string {
  if (value === null || value === undefined) return "";
  return value.toFixed(2);
}

export function verdictLabel(verdict: string): string {
  return verdict.replace(/_/g, " ");
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}
