// Display-only token joining. Target-language captions are written
// without separators; everything else reads with spaces between words.

export function joinTokens(tokens: readonly string[], language: string): string {
  return language === "target" ? tokens.join("") : tokens.join(" ");
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
