export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function tag(
  name: string,
  attrs: Record<string, string | number>,
  children?: string[]
): string {
  const parts = Object.entries(attrs).map(([k, v]) => `${k}="${esc(String(v))}"`);
  const open = `<${name}${parts.length ? " " + parts.join(" ") : ""}`;
  if (!children || children.length === 0) return `${open}/>`;
  return `${open}>${children.join("")}</${name}>`;
}

export function text(x: number, y: number, s: string, extra: Record<string, string | number> = {}): string {
  return tag("text", { x: px(x), y: px(y), "font-size": 12, "font-family": "sans-serif", ...extra }, [esc(s)]);
}

/** Pixel coordinate rounded for compact markup. */
export function px(v: number): number {
  return Math.round(v * 100) / 100;
}

export function document(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">`,
    tag("rect", { x: 0, y: 0, width, height, fill: "white" }),
    ...body,
    "</svg>",
  ].join("\n");
}
