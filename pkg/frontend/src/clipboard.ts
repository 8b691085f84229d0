// Copy-with-countdown: the clipboard is cleared when the countdown hits
// zero, matching the daemon-configured interval. The writer is injectable
// so tests (and non-clipboard environments) can observe the behavior.

export type ClipboardWriter = (text: string) => Promise<void>;

const navigatorWriter: ClipboardWriter = (text) =>
  navigator.clipboard.writeText(text);

export interface CountdownHandle {
  cancel(): void;
}

export function copyWithCountdown(
  text: string,
  seconds: number,
  onTick: (remaining: number) => void,
  writer: ClipboardWriter = navigatorWriter,
): CountdownHandle {
  void writer(text);
  let remaining = seconds;
  onTick(remaining);
  const timer = setInterval(() => {
    remaining -= 1;
    onTick(remaining);
    if (remaining <= 0) {
      clearInterval(timer);
      void writer("");
    }
  }, 1000);
  return {
    cancel() {
      clearInterval(timer);
    },
  };
}
