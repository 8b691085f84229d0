import { ApiError, DaemonClient, DaemonUnreachable } from "./api.js";
import { autofill } from "./autofill.js";

// Demo login form: autofill happens only on the explicit button click,
// using whatever session is already unlocked in the main UI.

const client = new DaemonClient();

function status(message: string): void {
  document.getElementById("demo-status")!.textContent = message;
}

async function fillPassword(): Promise<void> {
  const siteInput = document.getElementById("demo-site") as HTMLInputElement;
  const passwordField = document.getElementById("demo-password") as HTMLInputElement;
  try {
    const password = await client.generate(siteInput.value);
    autofill(passwordField, password);
    status("filled");
  } catch (err) {
    if (err instanceof DaemonUnreachable) {
      status("daemon unreachable");
    } else if (err instanceof ApiError && err.code === 401) {
      status("unlock a session in the main UI first");
    } else {
      status(String(err));
    }
  }
}

document.getElementById("demo-autofill")!.addEventListener("click", () => {
  void fillPassword();
});

document.getElementById("demo-form")!.addEventListener("submit", (event) => {
  event.preventDefault();
  status("login submitted (demo only)");
});
