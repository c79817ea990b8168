/** Tiny --flag value argv parser shared by the plot scripts. */

export class UsageError extends Error {}

export interface ParsedArgs {
  flags: Record<string, string>;
}

export function parseArgs(argv: string[], allowed: string[]): ParsedArgs {
  const flags: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const name = argv[i];
    if (!name.startsWith('--')) {
      throw new UsageError(`expected a --flag, found ${JSON.stringify(name)}`);
    }
    const key = name.slice(2);
    if (!allowed.includes(key)) {
      throw new UsageError(`unknown flag --${key}; allowed: ${allowed.map((f) => '--' + f).join(', ')}`);
    }
    const value = argv[i + 1];
    if (value === undefined) {
      throw new UsageError(`flag --${key} needs a value`);
    }
    flags[key] = value;
  }
  return { flags };
}

export function required(parsed: ParsedArgs, key: string): string {
  const value = parsed.flags[key];
  if (value === undefined) {
    throw new UsageError(`missing required flag --${key}`);
  }
  return value;
}
