import { ApiError, DaemonClient, DaemonUnreachable, SiteEntry } from "./api.js";
import { copyWithCountdown, CountdownHandle } from "./clipboard.js";

const client = new DaemonClient();

// Session state is plain module memory: nothing survives a reload.
let clipboardSeconds = 60;
let lastGenerated: { site: string; password: string } | null = null;
let countdown: CountdownHandle | null = null;

const $ = (id: string) => document.getElementById(id)!;

function showBanner(message: string): void {
  const banner = $("banner");
  banner.textContent = message;
  banner.classList.remove("hidden");
}

function hideBanner(): void {
  $("banner").classList.add("hidden");
}

function surface(err: unknown): void {
  if (err instanceof DaemonUnreachable) {
    showBanner("daemon unreachable - is `autopass serve` running?");
  } else if (err instanceof ApiError) {
    showBanner(`error ${err.code}: ${err.message}`);
  } else {
    showBanner(String(err));
  }
}

async function unlock(event: Event): Promise<void> {
  event.preventDefault();
  const input = $("unlock-password") as HTMLInputElement;
  try {
    await client.openSession(input.value);
  } catch (err) {
    // never echo why authentication failed beyond the generic banner
    if (err instanceof ApiError && err.code === 401) {
      showBanner("unlock failed");
    } else {
      surface(err);
    }
    return;
  } finally {
    input.value = "";
  }
  hideBanner();
  clipboardSeconds = (await client.config()).clipboard_clear_seconds;
  $("unlock-screen").classList.add("hidden");
  $("main-screen").classList.remove("hidden");
  await refreshSites();
}

async function refreshSites(): Promise<void> {
  try {
    renderSites(await client.listSites());
  } catch (err) {
    surface(err);
  }
}

function renderSites(sites: SiteEntry[]): void {
  const list = $("site-list");
  list.innerHTML = "";
  if (sites.length === 0) {
    list.innerHTML = "<li class='empty'>no sites yet - add one with the CLI</li>";
    return;
  }
  for (const site of sites) {
    const item = document.createElement("li");
    const name = document.createElement("span");
    name.className = "site-name";
    name.textContent = `${site.site_key} (v${site.version})`;
    item.appendChild(name);

    item.appendChild(actionButton("Generate", () => generateFor(site.site_key)));
    item.appendChild(actionButton("Pin...", () => pinFor(site.site_key)));
    item.appendChild(actionButton("Rotate", () => rotateFor(site.site_key)));
    if (site.has_reminder) {
      item.appendChild(actionButton("Reminder", () => showReminder(site.site_key)));
    }
    list.appendChild(item);
  }
}

function actionButton(label: string, handler: () => void): HTMLButtonElement {
  const button = document.createElement("button");
  button.textContent = label;
  button.addEventListener("click", handler);
  return button;
}

async function generateFor(site: string): Promise<void> {
  try {
    const password = await client.generate(site);
    lastGenerated = { site, password };
    hideBanner();
    showResult(site);
  } catch (err) {
    surface(err);
  }
}

function showResult(site: string): void {
  $("result").classList.remove("hidden");
  $("result-site").textContent = site;
  const field = $("result-password") as HTMLInputElement;
  field.type = "password";
  field.value = lastGenerated?.password ?? "";
  $("countdown").textContent = "";
}

function toggleReveal(): void {
  const field = $("result-password") as HTMLInputElement;
  field.type = field.type === "password" ? "text" : "password";
}

function copyResult(): void {
  if (!lastGenerated) return;
  countdown?.cancel();
  countdown = copyWithCountdown(
    lastGenerated.password,
    clipboardSeconds,
    (remaining) => {
      $("countdown").textContent =
        remaining > 0 ? `clipboard clears in ${remaining}s` : "clipboard cleared";
    },
  );
}

async function pinFor(site: string): Promise<void> {
  const desired = window.prompt(`Pin password for ${site}:`);
  if (desired === null || desired === "") return;
  try {
    await client.pin(site, desired);
    hideBanner();
    await refreshSites();
  } catch (err) {
    surface(err);
  }
}

async function rotateFor(site: string): Promise<void> {
  if (!window.confirm(`Rotate the password for ${site}?`)) return;
  try {
    await client.rotate(site);
    lastGenerated = null;
    $("result").classList.add("hidden");
    hideBanner();
    await refreshSites();
  } catch (err) {
    surface(err);
  }
}

async function showReminder(site: string): Promise<void> {
  try {
    const reminder = await client.reminder(site);
    window.alert(reminder ?? "(no reminder)");
  } catch (err) {
    surface(err);
  }
}

function lock(): void {
  void client.closeSession();
  lastGenerated = null;
  countdown?.cancel();
  $("main-screen").classList.add("hidden");
  $("result").classList.add("hidden");
  $("unlock-screen").classList.remove("hidden");
}

export function init(): void {
  $("unlock-form").addEventListener("submit", unlock);
  $("reveal").addEventListener("click", toggleReveal);
  $("copy").addEventListener("click", copyResult);
  $("lock").addEventListener("click", lock);
  $("refresh").addEventListener("click", () => void refreshSites());
}

init();
