export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

// Tier badges use hues matching the tier names so no legend is needed.
// The tier STRING always comes from the service; this is styling only.
const TIER_CLASSES: Record<string, string> = {
  Green: "tier-green",
  Yellow: "tier-yellow",
  Orange: "tier-orange",
  Red: "tier-red",
};

export function tierBadge(tier: string): string {
  const cls = TIER_CLASSES[tier] ?? "tier-unknown";
  return `<span class="tier-badge ${cls}">${escapeHtml(tier)}</span>`;
}

export function errorBanner(message: string): string {
  return (
    `<div class="error-banner" role="alert">` +
    `<span>${escapeHtml(message)}</span>` +
    `<button type="button" data-action="retry">Retry</button>` +
    `</div>`
  );
}
