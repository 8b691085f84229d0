// Fill a password field behind an explicit user action (never on load).

export interface PasswordField {
  value: string;
}

export function autofill(field: PasswordField, password: string): void {
  field.value = password;
}
